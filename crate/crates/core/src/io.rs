//! Deterministic file emitters: PGM renders, odometer CSV, cluster lists.

use std::fs;
use std::path::Path;

use crate::config::SandpileConfig;
use crate::engine::StabilizationResult;
use crate::error::{Result, SandpileError};
use crate::geometry::{toppled_cluster, Cluster};
use crate::lattice::{BoundingBox, LatticePoint};
use crate::odometer::Odometer;

/// Gray level for a height: 255 - 60 min(h, 4).
pub fn gray(height: u64) -> u8 {
    255 - 60 * height.min(4) as u8
}

/// Binary PGM of `config` over `frame`; top row is the largest y.
pub fn pgm_bytes(config: &SandpileConfig, frame: &BoundingBox) -> Result<Vec<u8>> {
    if config.dim() != 2 || frame.dim() != 2 {
        return Err(SandpileError::UnsupportedDimension {
            required: 2,
            found: config.dim(),
        });
    }
    let (x0, x1) = (frame.lo()[0], frame.hi()[0]);
    let (y0, y1) = (frame.lo()[1], frame.hi()[1]);
    let mut out = format!("P5\n{} {}\n255\n", x1 - x0 + 1, y1 - y0 + 1).into_bytes();
    for y in (y0..=y1).rev() {
        for x in x0..=x1 {
            out.push(gray(config.height(&(x, y).into())));
        }
    }
    Ok(out)
}

/// The frame a final configuration is rendered over: the visited cluster's
/// bounding box (the toppled box padded by 1), or `None` if nothing toppled.
pub fn render_frame(toppled: &Cluster) -> Option<BoundingBox> {
    let mut cells = toppled.iter();
    let first = cells.next()?;
    let mut b = BoundingBox::new(first.coords(), first.coords()).expect("single cell");
    for p in cells {
        b = b.including(&p);
    }
    Some(b.padded(1))
}

/// Renders the final configuration of `result`. An empty toppled cluster
/// yields a 1x1 image of the background gray.
pub fn result_pgm(result: &StabilizationResult) -> Result<Vec<u8>> {
    let fin = &result.final_config;
    match render_frame(&toppled_cluster(result)) {
        Some(frame) => pgm_bytes(fin, &frame),
        None => {
            if fin.dim() != 2 {
                return Err(SandpileError::UnsupportedDimension {
                    required: 2,
                    found: fin.dim(),
                });
            }
            let mut out = b"P5\n1 1\n255\n".to_vec();
            out.push(gray(fin.background()));
            Ok(out)
        }
    }
}

pub fn emit_pgm(result: &StabilizationResult, path: &Path) -> Result<()> {
    fs::write(path, result_pgm(result)?)?;
    Ok(())
}

fn axis_names(dim: usize) -> Vec<String> {
    match dim {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        _ => (1..=dim).map(|a| format!("x{a}")).collect(),
    }
}

/// `x,y,...,count` rows for every toppled cell in lexicographic order.
pub fn odometer_csv(odometer: &Odometer) -> String {
    let mut rows: Vec<(LatticePoint, u64)> = odometer.support().collect();
    rows.sort();
    let mut out = axis_names(odometer.dim()).join(",");
    out.push_str(",count\n");
    for (p, k) in rows {
        for c in p.coords() {
            out.push_str(&c.to_string());
            out.push(',');
        }
        out.push_str(&k.to_string());
        out.push('\n');
    }
    out
}

pub fn emit_odometer_csv(odometer: &Odometer, path: &Path) -> Result<()> {
    fs::write(path, odometer_csv(odometer))?;
    Ok(())
}

pub fn emit_cluster(cluster: &Cluster, path: &Path) -> Result<()> {
    fs::write(path, cluster.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::make_point_source;
    use crate::engine::{stabilize, Strategy, DEFAULT_BUDGET};

    fn run(n: u64, h: u64) -> StabilizationResult {
        stabilize(
            &make_point_source(n, h, 2),
            Strategy::BulkFifo,
            DEFAULT_BUDGET,
        )
        .unwrap()
    }

    #[test]
    fn render_of_a_single_toppling() {
        let bytes = result_pgm(&run(4, 2)).unwrap();
        let header = b"P5\n3 3\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(
            &bytes[header.len()..],
            &[135, 75, 135, 75, 255, 75, 135, 75, 135]
        );
    }

    #[test]
    fn render_of_nothing_toppled() {
        let bytes = result_pgm(&run(3, 2)).unwrap();
        assert_eq!(bytes, b"P5\n1 1\n255\n\x87".to_vec());
    }

    #[test]
    fn gray_levels() {
        assert_eq!(
            [gray(0), gray(1), gray(2), gray(3), gray(4), gray(9)],
            [255, 195, 135, 75, 15, 15]
        );
    }

    #[test]
    fn odometer_rows() {
        assert_eq!(odometer_csv(&run(4, 2).odometer), "x,y,count\n0,0,1\n");
        assert_eq!(odometer_csv(&run(3, 2).odometer), "x,y,count\n");
        let csv = odometer_csv(&run(16, 0).odometer);
        let coords: Vec<(i64, i64)> = csv
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<i64> = l.split(',').map(|t| t.parse().unwrap()).collect();
                (f[0], f[1])
            })
            .collect();
        let mut sorted = coords.clone();
        sorted.sort();
        assert_eq!(coords, sorted);
        assert_eq!(csv, odometer_csv(&run(16, 0).odometer));
    }

    #[test]
    fn higher_dimensional_headers() {
        let r = stabilize(
            &make_point_source(6, 0, 3),
            Strategy::BulkFifo,
            DEFAULT_BUDGET,
        )
        .unwrap();
        assert_eq!(odometer_csv(&r.odometer), "x,y,z,count\n0,0,0,1\n");
        assert!(result_pgm(&r).is_err());
    }
}
