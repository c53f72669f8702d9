use serde::Serialize;

use crate::config::{
    add_everywhere, config_leq, make_point_source, make_square_config, SandpileConfig,
};
use crate::engine::{
    conservation_violation, replay_schedule, stabilize, staged_square_schedule, Schedule,
    StabilizationResult, Strategy, StuckCell,
};
use crate::error::{Result, SandpileError};
use crate::geometry::{
    adjacent_zero_pairs, domino_lower_bound, largest_diamond, radius, toppled_cluster,
    visited_cluster, Cluster, DominoCount,
};
use crate::lattice::LatticePoint;
use crate::odometer::Odometer;

use super::{run_point_source, stabilize_point_source, PointSourceRun};

fn run(c: &SandpileConfig, strategy: Strategy, budget: u64) -> Result<StabilizationResult> {
    finished(stabilize(c, strategy, budget)?)
}

fn finished(r: StabilizationResult) -> Result<StabilizationResult> {
    if r.budget_exhausted {
        return Err(SandpileError::BudgetExhausted {
            topplings: r.total_topplings,
        });
    }
    Ok(r)
}

fn first_difference_cfg(a: &SandpileConfig, b: &SandpileConfig) -> Option<LatticePoint> {
    a.bbox()
        .union(b.bbox())
        .points()
        .find(|p| a.height(p) != b.height(p))
}

fn first_difference_odo(a: &Odometer, b: &Odometer) -> Option<LatticePoint> {
    a.bbox()
        .union(b.bbox())
        .points()
        .find(|p| a.get(p) != b.get(p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatch {
    pub strategy: String,
    /// `final`, `odometer`, `background` or `conservation`.
    pub quantity: String,
    pub cell: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AbelianReport {
    pub passed: bool,
    pub strategies: Vec<String>,
    pub total_topplings: u64,
    pub mismatch: Option<Mismatch>,
}

/// Stabilizes `c` under fifo, lifo, bulk-fifo, tiled-parallel and `trials`
/// random orders; passes iff all finals and odometers coincide and every
/// run conserves particles.
pub fn abelian_check(
    c: &SandpileConfig,
    trials: usize,
    seed: u64,
    budget: u64,
) -> Result<AbelianReport> {
    let mut strategies = vec![
        Strategy::Fifo,
        Strategy::Lifo,
        Strategy::BulkFifo,
        Strategy::TiledParallel { tile_side: 16 },
    ];
    strategies.extend((0..trials as u64).map(|t| Strategy::Random {
        seed: seed.wrapping_add(t.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
    }));

    let reference = run(c, strategies[0], budget)?;
    let mut report = AbelianReport {
        passed: true,
        strategies: strategies.iter().map(Strategy::to_string).collect(),
        total_topplings: reference.total_topplings,
        mismatch: None,
    };
    for &s in &strategies {
        let r = if s == strategies[0] {
            reference.clone()
        } else {
            run(c, s, budget)?
        };
        let mismatch = |quantity: &str, cell: Option<LatticePoint>| Mismatch {
            strategy: s.to_string(),
            quantity: quantity.into(),
            cell: cell.map(|p| p.to_string()),
        };
        let found = if let Some(p) = conservation_violation(c, &r) {
            Some(mismatch("conservation", Some(p)))
        } else if r.final_config.background() != reference.final_config.background() {
            Some(mismatch("background", None))
        } else if let Some(p) = first_difference_cfg(&r.final_config, &reference.final_config) {
            Some(mismatch("final", Some(p)))
        } else {
            first_difference_odo(&r.odometer, &reference.odometer)
                .map(|p| mismatch("odometer", Some(p)))
        };
        if found.is_some() {
            report.passed = false;
            report.mismatch = found;
            break;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub passed: bool,
    pub toppled_subset: bool,
    pub visited_subset: bool,
    /// Pointwise odometer domination; a stronger form, reported separately.
    pub odometer_dominated: bool,
    pub toppled_sizes: (usize, usize),
}

/// For `a <= b`: toppled and visited clusters of `a` lie inside those of `b`.
pub fn monotonicity_check(
    a: &SandpileConfig,
    b: &SandpileConfig,
    strategy: Strategy,
    budget: u64,
) -> Result<MonotonicityReport> {
    if !config_leq(a, b)? {
        return Err(SandpileError::InvalidInput(
            "monotonicity check needs a <= b pointwise".into(),
        ));
    }
    let ra = run(a, strategy, budget)?;
    let rb = run(b, strategy, budget)?;
    let (ta, tb) = (toppled_cluster(&ra), toppled_cluster(&rb));
    let toppled_subset = ta.is_subset(&tb);
    let visited_subset = visited_cluster(&ra).is_subset(&visited_cluster(&rb));
    Ok(MonotonicityReport {
        passed: toppled_subset && visited_subset,
        toppled_subset,
        visited_subset,
        odometer_dominated: ra.odometer.leq(&rb.odometer),
        toppled_sizes: (ta.len(), tb.len()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma2Report {
    pub r1: u64,
    pub r2: u64,
    pub radius: u64,
    pub bound: u64,
    pub passed: bool,
}

/// Square of 4s (radius r1) inside 3s (radius r2) on ground 2: the toppled
/// cluster must lie in `S_{r1+r2}`.
pub fn lemma2_check(r1: u64, r2: u64, strategy: Strategy, budget: u64) -> Result<Lemma2Report> {
    let c = make_square_config(r1, r2, 2, 2)?;
    let r = run(&c, strategy, budget)?;
    let toppled = toppled_cluster(&r);
    let bound = r1 + r2;
    Ok(Lemma2Report {
        r1,
        r2,
        radius: radius(&toppled),
        bound,
        passed: toppled.is_subset(&Cluster::square(2, bound)),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma2StageReport {
    pub r1: u64,
    pub r2: u64,
    pub legal: bool,
    pub stuck: Option<String>,
    /// `None` when r1 = r2 and there is no repeat phase.
    pub interior_ok: Option<bool>,
    /// Frame cells after the first round with heights outside {1, 2}.
    pub frame_anomalies: Vec<String>,
    pub final_pattern_ok: bool,
    pub containment_ok: bool,
    pub failure: Option<String>,
    pub passed: bool,
}

/// Replays the staged square schedule and checks each intermediate pattern.
pub fn lemma2_stage_check(r1: u64, r2: u64) -> Result<Lemma2StageReport> {
    let sched = staged_square_schedule(r1, r2, 2)?;
    let mut config = make_square_config(r1, r2, 2, 2)?;
    let mut odometer = Odometer::zero(config.bbox().clone());
    let mut report = Lemma2StageReport {
        r1,
        r2,
        legal: true,
        stuck: None,
        interior_ok: None,
        frame_anomalies: Vec::new(),
        final_pattern_ok: false,
        containment_ok: false,
        failure: None,
        passed: false,
    };
    let (r1i, r2i) = (r1 as i64, r2 as i64);

    for (k, round) in sched.rounds().iter().enumerate() {
        let step = replay_schedule(&config, &Schedule::new(vec![round.clone()]));
        config = step.config;
        odometer = odometer.sum(&step.odometer);
        if !step.report.legal {
            let StuckCell { point, height, .. } =
                step.report.stuck.expect("illegal replay names a cell");
            report.legal = false;
            report.stuck = Some(format!("round {k}: {point} holds {height}"));
            report.failure = report.stuck.clone();
            return Ok(report);
        }
        if k == 0 && r1 < r2 {
            // S_r1 of 4s inside S_{r2-1} of 3s, frame S_r2 \ S_{r2-1}
            let mut bad = None;
            for p in Cluster::square(2, r2).iter() {
                let norm = p.linf_norm();
                let h = config.height(&p);
                if norm < r2i - 1 {
                    let want = if norm < r1i { 4 } else { 3 };
                    if h != want && bad.is_none() {
                        bad = Some(format!("after round 0: {p} holds {h}, expected {want}"));
                    }
                } else if !(1..=2).contains(&h) {
                    report.frame_anomalies.push(format!("{p}:{h}"));
                }
            }
            report.interior_ok = Some(bad.is_none());
            if bad.is_some() {
                report.failure = bad;
            }
        }
    }

    // S_{r1-1} full of 4s, every other cell stable, no 3 outside S_{r2+1}
    let region = config.bbox().padded(1);
    let offending = region.points().find(|p| {
        let norm = p.linf_norm();
        let h = config.height(p);
        if norm < r1i - 1 {
            h != 4
        } else {
            h >= 4 || (norm > r2i && h == 3)
        }
    });
    report.final_pattern_ok = offending.is_none() && config.background() == 2;
    if let Some(p) = offending {
        report.failure.get_or_insert(format!(
            "after final round: {p} holds {}",
            config.height(&p)
        ));
    }

    let allowed = Cluster::square(2, r1 + r2);
    report.containment_ok = odometer.support().all(|(p, _)| allowed.contains(&p));
    if !report.containment_ok {
        report
            .failure
            .get_or_insert("toppling outside S_{r1+r2}".into());
    }
    report.passed = report.legal
        && report.interior_ok.unwrap_or(true)
        && report.final_pattern_ok
        && report.containment_ok;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub initial: SandpileConfig,
    pub result: StabilizationResult,
    /// Radius of the toppled cluster accumulated up to this stage.
    pub radius: u64,
}

/// Ground-0 run of n-2 particles, then two rounds of "+1 everywhere and
/// stabilize".
#[derive(Clone, Debug)]
pub struct StageTrace {
    pub stages: Vec<Stage>,
    pub cumulative_odometer: Odometer,
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem2StagesReport {
    pub n: u64,
    pub epsilon: f64,
    pub radii: [u64; 3],
    pub first_stage_bound: f64,
    pub growth_ok: [bool; 2],
    pub first_stage_ok: bool,
    pub final_matches_direct: bool,
    pub odometer_matches_direct: bool,
    pub direct_radius: u64,
    pub passed: bool,
}

pub fn theorem2_stages(
    n: u64,
    epsilon: f64,
    strategy: Strategy,
    budget: u64,
) -> Result<(StageTrace, Theorem2StagesReport)> {
    if n < 4 {
        return Err(SandpileError::InvalidInput(format!(
            "staged decomposition needs n >= 4, got {n}"
        )));
    }
    let mut stages: Vec<Stage> = Vec::with_capacity(3);
    let mut cumulative = Odometer::zero(crate::lattice::BoundingBox::origin(2));
    for s in 0..3 {
        let (initial, result) = if s == 0 {
            let r = finished(stabilize_point_source(n - 2, 0, 2, strategy, budget)?)?;
            (make_point_source(n - 2, 0, 2), r)
        } else {
            let initial = add_everywhere(&stages[s - 1].result.final_config, 1);
            let r = run(&initial, strategy, budget)?;
            (initial, r)
        };
        cumulative = cumulative.sum(&result.odometer);
        let toppled =
            Cluster::from_points(2, &cumulative.support().map(|(p, _)| p).collect::<Vec<_>>());
        stages.push(Stage {
            initial,
            result,
            radius: radius(&toppled),
        });
    }
    let direct = finished(stabilize_point_source(n, 2, 2, strategy, budget)?)?;
    let radii = [stages[0].radius, stages[1].radius, stages[2].radius];
    let first_stage_bound = (1.0 + epsilon) * (n as f64).sqrt();
    let growth_ok = [
        radii[1] <= 2 * radii[0].max(1),
        radii[2] <= 2 * radii[1].max(1),
    ];
    let first_stage_ok = radii[0] as f64 <= first_stage_bound;
    let final_matches_direct = stages[2].result.final_config == direct.final_config;
    let odometer_matches_direct = cumulative == direct.odometer;
    let report = Theorem2StagesReport {
        n,
        epsilon,
        radii,
        first_stage_bound,
        growth_ok,
        first_stage_ok,
        final_matches_direct,
        odometer_matches_direct,
        direct_radius: radius(&toppled_cluster(&direct)),
        passed: growth_ok[0] && growth_ok[1] && first_stage_ok && final_matches_direct,
    };
    Ok((
        StageTrace {
            stages,
            cumulative_odometer: cumulative,
        },
        report,
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct Lemma1Report {
    pub n: u64,
    pub epsilon: f64,
    pub radius: u64,
    pub bound: f64,
    pub radius_ok: bool,
    pub zero_pairs: usize,
    pub dominoes: u64,
    pub occupied_dominoes: u64,
    pub domino_ok: bool,
    /// Largest diamond inside the toppled cluster; reported, not gating.
    pub largest_diamond: u64,
    pub passed: bool,
}

/// Ground-0 point source: radius at most (1+eps) sqrt(n), no two adjacent
/// empty toppled cells, and n covers the occupied dominoes of `D_radius`.
pub fn lemma1_check(n: u64, epsilon: f64, strategy: Strategy, budget: u64) -> Result<Lemma1Report> {
    let run = run_point_source(n, 0, 2, strategy, budget)?;
    lemma1_report(n, epsilon, &run)
}

pub fn lemma1_report(n: u64, epsilon: f64, run: &PointSourceRun) -> Result<Lemma1Report> {
    let toppled = toppled_cluster(&run.result);
    let fin = &run.result.final_config;
    let r = radius(&toppled);
    let bound = (1.0 + epsilon) * (n as f64).sqrt();
    let zero_pairs = adjacent_zero_pairs(fin, &toppled);
    let DominoCount { complete, occupied } = domino_lower_bound(fin, r)?;
    let radius_ok = r as f64 <= bound;
    let domino_ok = n >= occupied;
    Ok(Lemma1Report {
        n,
        epsilon,
        radius: r,
        bound,
        radius_ok,
        zero_pairs,
        dominoes: complete,
        occupied_dominoes: occupied,
        domino_ok,
        largest_diamond: largest_diamond(&toppled),
        passed: radius_ok && zero_pairs == 0 && domino_ok,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Report {
    pub n: u64,
    pub radius: u64,
    pub square_r: Option<u64>,
    pub passed: bool,
}

/// Ground-2 point source: the toppled cluster is exactly a centred square.
pub fn theorem1_square_check(n: u64, strategy: Strategy, budget: u64) -> Result<Theorem1Report> {
    let run = run_point_source(n, 2, 2, strategy, budget)?;
    Ok(theorem1_report(&run))
}

pub fn theorem1_report(run: &PointSourceRun) -> Theorem1Report {
    Theorem1Report {
        n: run.record.n,
        radius: run.record.cluster_radius,
        square_r: run.record.square_r,
        passed: run.record.square_r.is_some(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem2BoundsReport {
    pub n: u64,
    pub radius: u64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub passed: bool,
}

/// Ground-2 point source: sqrt(n) <= radius <= 4 (1+eps) sqrt(n).
pub fn theorem2_bounds_check(
    n: u64,
    epsilon: f64,
    strategy: Strategy,
    budget: u64,
) -> Result<Theorem2BoundsReport> {
    let run = run_point_source(n, 2, 2, strategy, budget)?;
    Ok(theorem2_bounds_report(n, epsilon, &run))
}

pub fn theorem2_bounds_report(n: u64, epsilon: f64, run: &PointSourceRun) -> Theorem2BoundsReport {
    let root = (n as f64).sqrt();
    let r = run.record.cluster_radius;
    let lower_ok = r as f64 >= root;
    let upper = 4.0 * (1.0 + epsilon) * root;
    let upper_ok = r as f64 <= upper;
    Theorem2BoundsReport {
        n,
        radius: r,
        lower: root,
        upper,
        lower_ok,
        upper_ok,
        passed: lower_ok && upper_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DEFAULT_BUDGET;
    use crate::experiments::random_config;

    const B: u64 = DEFAULT_BUDGET;

    #[test]
    fn abelian_on_trivial_and_random_inputs() {
        let rep = abelian_check(&make_point_source(4, 2, 2), 3, 1, B).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.total_topplings, 1);
        let rep = abelian_check(&random_config(5), 5, 9, B).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.strategies.len(), 9);
    }

    #[test]
    fn monotonicity_examples() {
        let a = make_point_source(40, 2, 2);
        let b = make_point_source(41, 2, 2);
        assert!(
            monotonicity_check(&a, &b, Strategy::BulkFifo, B)
                .unwrap()
                .passed
        );
        assert!(
            monotonicity_check(&a, &a, Strategy::BulkFifo, B)
                .unwrap()
                .passed
        );
        let a = make_point_source(100, 0, 2);
        let mut b = a.clone();
        b.add_at(&(5, 5).into(), 3);
        let rep = monotonicity_check(&a, &b, Strategy::BulkFifo, B).unwrap();
        assert!(rep.passed && rep.odometer_dominated, "{rep:?}");
        assert!(monotonicity_check(&b, &a, Strategy::BulkFifo, B).is_err());
    }

    #[test]
    fn lemma2_small_cases() {
        let rep = lemma2_check(0, 5, Strategy::BulkFifo, B).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.radius, 0);
        let rep = lemma2_check(1, 1, Strategy::BulkFifo, B).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.radius, 1);
        let rep = lemma2_check(10, 10, Strategy::BulkFifo, B).unwrap();
        assert!(rep.passed && rep.radius <= 20, "{rep:?}");
    }

    #[test]
    fn staged_replays() {
        let rep = lemma2_stage_check(1, 1).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.interior_ok, None);
        let rep = lemma2_stage_check(2, 4).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.interior_ok, Some(true));
        assert!(rep.frame_anomalies.is_empty());
        let rep = lemma2_stage_check(3, 3).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.interior_ok, None);
    }

    #[test]
    fn theorem2_stages_for_four() {
        let (trace, rep) = theorem2_stages(4, 0.1, Strategy::BulkFifo, B).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(trace.stages[0].result.total_topplings, 0);
        assert_eq!(trace.stages[1].result.total_topplings, 0);
        assert_eq!(trace.stages[2].result.total_topplings, 1);
        assert_eq!(rep.radii, [0, 0, 1]);
        assert!(rep.odometer_matches_direct);
        assert!(theorem2_stages(3, 0.1, Strategy::BulkFifo, B).is_err());
    }

    #[test]
    fn lemma1_for_four() {
        let rep = lemma1_check(4, 0.1, Strategy::BulkFifo, B).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.radius, 1);
        assert_eq!(rep.zero_pairs, 0);
    }
}
