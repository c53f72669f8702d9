//! Verification campaigns: point-source runs, scaling sweeps, and the
//! lemma/theorem checks built on the engine and the cluster geometry.

mod checks;
mod fit;
mod multiscale;
mod random;

use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::config::make_point_source;
use crate::engine::{audit_enabled, stabilize, StabilizationResult, Strategy};
use crate::error::{Result, SandpileError};
use crate::geometry::{largest_diamond, match_square, radius, toppled_cluster};

pub use checks::{
    abelian_check, lemma1_check, lemma1_report, lemma2_check, lemma2_stage_check,
    monotonicity_check, theorem1_report, theorem1_square_check, theorem2_bounds_check,
    theorem2_bounds_report, theorem2_stages, AbelianReport, Lemma1Report, Lemma2Report,
    Lemma2StageReport, Mismatch, MonotonicityReport, Stage, StageTrace, Theorem1Report,
    Theorem2BoundsReport, Theorem2StagesReport,
};
pub use fit::{fit_power_law, median, ScalingFit};
pub use multiscale::{solve_point_source, upscale, WARM_START_MIN};
pub use random::{random_bumped_pair, random_config, RANDOM_MAX_HEIGHT, RANDOM_SQUARE_RADIUS};

/// Slack standing in for the o(1) terms: 0.1 from n = 10^4, 0.05 from 10^6.
pub fn default_epsilon(n: u64) -> f64 {
    if n >= 1_000_000 {
        0.05
    } else {
        0.1
    }
}

/// Half-width of the accepted window around 1/d for fitted exponents.
pub const ALPHA_WINDOW: f64 = 0.04;

/// One row of a scaling experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub n: u64,
    pub h: u64,
    pub d: usize,
    pub cluster_radius: u64,
    pub diamond_radius: u64,
    pub square_r: Option<u64>,
    pub total_topplings: u64,
    pub wall_time: f64,
}

impl SweepRecord {
    pub const CSV_HEADER: &'static str =
        "n,h,d,radius,diamond_radius,square_r,total_topplings,wall_time_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6}",
            self.n,
            self.h,
            self.d,
            self.cluster_radius,
            self.diamond_radius,
            self.square_r.map(|r| r.to_string()).unwrap_or_default(),
            self.total_topplings,
            self.wall_time
        )
    }
}

/// Point-source run with its derived metrics.
#[derive(Clone, Debug)]
pub struct PointSourceRun {
    pub record: SweepRecord,
    pub result: StabilizationResult,
}

/// Stabilizes `n` particles on ground `h` and measures the toppled cluster.
/// Running out of budget is an error here.
///
/// Large bulk-fifo runs go through [`solve_point_source`], which yields the
/// same result with far fewer operations; audit mode keeps the plain run.
pub fn run_point_source(
    n: u64,
    h: u64,
    d: usize,
    strategy: Strategy,
    budget: u64,
) -> Result<PointSourceRun> {
    let start = Instant::now();
    let result = stabilize_point_source(n, h, d, strategy, budget)?;
    let wall_time = start.elapsed().as_secs_f64();
    if result.budget_exhausted {
        return Err(SandpileError::BudgetExhausted {
            topplings: result.total_topplings,
        });
    }
    let toppled = toppled_cluster(&result);
    let record = SweepRecord {
        n,
        h,
        d,
        cluster_radius: radius(&toppled),
        diamond_radius: largest_diamond(&toppled),
        square_r: match_square(&toppled),
        total_topplings: result.total_topplings,
        wall_time,
    };
    Ok(PointSourceRun { record, result })
}

/// Point-source stabilization, coarse to fine for bulk-fifo outside audit
/// mode.
pub fn stabilize_point_source(
    n: u64,
    h: u64,
    d: usize,
    strategy: Strategy,
    budget: u64,
) -> Result<StabilizationResult> {
    if strategy == Strategy::BulkFifo && !audit_enabled() {
        solve_point_source(n, h, d, budget)
    } else {
        stabilize(&make_point_source(n, h, d), strategy, budget)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sweep {
    pub records: Vec<SweepRecord>,
    pub fit: ScalingFit,
}

impl Sweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SweepRecord::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Runs every size (in parallel with the `parallel` feature) and fits
/// `r ~ c n^alpha` over the upper half of the sizes.
pub fn sweep(n_list: &[u64], h: u64, d: usize, strategy: Strategy, budget: u64) -> Result<Sweep> {
    let records = sweep_records(n_list, h, d, strategy, budget)?;
    let samples: Vec<(u64, u64)> = records.iter().map(|r| (r.n, r.cluster_radius)).collect();
    let fit = fit_power_law(&samples)?;
    Ok(Sweep { records, fit })
}

/// The records of [`sweep`] without the fit, in `n_list` order.
pub fn sweep_records(
    n_list: &[u64],
    h: u64,
    d: usize,
    strategy: Strategy,
    budget: u64,
) -> Result<Vec<SweepRecord>> {
    if n_list.is_empty() {
        return Err(SandpileError::TooFewPoints(0));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SandpileError::InvalidInput(
            "sweep sizes must be strictly increasing".into(),
        ));
    }
    let run = |&n: &u64| run_point_source(n, h, d, strategy, budget).map(|r| r.record);
    #[cfg(feature = "parallel")]
    let records: Vec<SweepRecord> = n_list.par_iter().map(run).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let records: Vec<SweepRecord> = n_list.iter().map(run).collect::<Result<_>>()?;
    Ok(records)
}

/// `count` sizes from `lo` to `hi`, evenly spaced in log n and rounded.
pub fn log_spaced(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    assert!(count >= 2 && lo >= 1 && hi > lo);
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DEFAULT_BUDGET;

    #[test]
    fn small_point_sources() {
        let run = run_point_source(4, 2, 2, Strategy::BulkFifo, DEFAULT_BUDGET).unwrap();
        assert_eq!(run.record.cluster_radius, 1);
        assert_eq!(run.record.square_r, Some(1));
        assert_eq!(run.record.total_topplings, 1);

        let run = run_point_source(5, 2, 2, Strategy::BulkFifo, DEFAULT_BUDGET).unwrap();
        assert_eq!(run.record.cluster_radius, 1);
        assert_eq!(run.record.total_topplings, 1);
        assert_eq!(run.result.final_config.height(&(0, 0).into()), 1);
    }

    #[test]
    fn budget_exhaustion_propagates() {
        let err = run_point_source(10, 3, 2, Strategy::BulkFifo, 1000).unwrap_err();
        assert!(matches!(
            err,
            SandpileError::BudgetExhausted { topplings: 1000 }
        ));
    }

    #[test]
    fn log_spacing() {
        assert_eq!(
            log_spaced(1000, 1_000_000, 4),
            vec![1000, 10_000, 100_000, 1_000_000]
        );
        let seven = log_spaced(1000, 1_000_000, 7);
        assert_eq!(seven.len(), 7);
        assert_eq!(seven[1], 3162);
    }

    #[test]
    fn csv_rows() {
        let r = SweepRecord {
            n: 10,
            h: 2,
            d: 2,
            cluster_radius: 3,
            diamond_radius: 2,
            square_r: None,
            total_topplings: 7,
            wall_time: 0.5,
        };
        assert_eq!(r.csv_row(), "10,2,2,3,2,,7,0.500000");
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        assert!(sweep(&[], 2, 2, Strategy::BulkFifo, DEFAULT_BUDGET).is_err());
        assert!(sweep(&[100, 10], 2, 2, Strategy::BulkFifo, DEFAULT_BUDGET).is_err());
        assert!(matches!(
            sweep(&[10, 20], 2, 2, Strategy::BulkFifo, DEFAULT_BUDGET),
            Err(SandpileError::TooFewPoints(_))
        ));
    }
}
