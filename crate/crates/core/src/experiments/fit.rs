use serde::Serialize;

use crate::error::{Result, SandpileError};

/// Power law `r ~ c * n^alpha` from least squares on (ln n, ln r).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub c: f64,
    pub alpha: f64,
    pub n_min_used: u64,
    pub points: usize,
}

/// Median of the sizes; the mean of the middle pair for even counts.
pub fn median(values: &[u64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] as f64 + v[m] as f64) / 2.0
    }
}

/// Fits over the pairs with n at or above the median n. Pairs with r = 0
/// carry no information on a log scale and are skipped.
pub fn fit_power_law(samples: &[(u64, u64)]) -> Result<ScalingFit> {
    if samples.is_empty() {
        return Err(SandpileError::TooFewPoints(0));
    }
    let ns: Vec<u64> = samples.iter().map(|s| s.0).collect();
    let cut = median(&ns);
    let used: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(n, r)| *n as f64 >= cut && *r > 0)
        .map(|(n, r)| ((*n as f64).ln(), (*r as f64).ln()))
        .collect();
    if used.len() < 3 {
        return Err(SandpileError::TooFewPoints(used.len()));
    }
    let k = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / k;
    let my = used.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(SandpileError::InvalidInput(
            "scaling fit needs at least two distinct sizes".into(),
        ));
    }
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let n_min_used = samples
        .iter()
        .filter(|(n, r)| *n as f64 >= cut && *r > 0)
        .map(|s| s.0)
        .min()
        .expect("at least three points used");
    Ok(ScalingFit {
        c: intercept.exp(),
        alpha,
        n_min_used,
        points: used.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let samples: Vec<(u64, u64)> = (1..=9u32)
            .map(|i| {
                let n = 10u64.pow(i);
                (n, (3.0 * (n as f64).powf(0.5)).round() as u64)
            })
            .collect();
        let fit = fit_power_law(&samples).unwrap();
        assert!((fit.alpha - 0.5).abs() < 1e-3, "{fit:?}");
        assert!((fit.c - 3.0).abs() < 1e-2, "{fit:?}");
        assert_eq!(fit.n_min_used, 100_000);
        assert_eq!(fit.points, 5);
    }

    #[test]
    fn median_cut_on_even_lists() {
        assert_eq!(median(&[1, 2, 3, 4]), 2.5);
        assert_eq!(median(&[5, 1, 3]), 3.0);
        let samples = [(1, 1), (2, 2), (4, 4), (8, 8), (16, 16), (32, 32)];
        let fit = fit_power_law(&samples).unwrap();
        assert_eq!((fit.points, fit.n_min_used), (3, 8));
        assert!((fit.alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            fit_power_law(&[(10, 3), (100, 9)]),
            Err(SandpileError::TooFewPoints(_))
        ));
        assert!(matches!(
            fit_power_law(&[]),
            Err(SandpileError::TooFewPoints(0))
        ));
    }
}
