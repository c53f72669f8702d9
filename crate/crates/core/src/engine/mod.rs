//! Toppling and stabilization.

mod field;
mod schedule;
mod sequential;
mod tiled;
mod warm;

use std::fmt;
use std::str::FromStr;

use crate::config::SandpileConfig;
use crate::error::{Result, SandpileError};
use crate::lattice::LatticePoint;
use crate::odometer::Odometer;

pub use schedule::{
    replay_schedule, staged_square_schedule, Replay, ReplayReport, Round, Schedule, StuckCell,
};
pub use tiled::Execution;

use field::Field;
use sequential::{drain, Fifo, Lifo, RandomPick};

/// Far above any terminating desk-scale run.
pub const DEFAULT_BUDGET: u64 = 100_000_000_000;

pub const DEFAULT_TILE_SIDE: usize = 64;

/// Environment switch for per-toppling legality assertions.
pub const AUDIT_ENV: &str = "SANDPILE_AUDIT";

/// Order in which active cells are toppled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Queue of active cells, one toppling per visit.
    Fifo,
    /// Stack of active cells, one toppling per visit.
    Lifo,
    /// Uniformly random active cell, one toppling per step.
    Random { seed: u64 },
    /// Queue of active cells; a visit fires floor(h / 2d) topplings at once.
    #[default]
    BulkFifo,
    /// Square tiles relaxed independently between barriers.
    TiledParallel { tile_side: usize },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Fifo => write!(f, "fifo"),
            Strategy::Lifo => write!(f, "lifo"),
            Strategy::Random { seed } => write!(f, "random:{seed}"),
            Strategy::BulkFifo => write!(f, "bulk-fifo"),
            Strategy::TiledParallel { tile_side } => write!(f, "tiled-parallel:{tile_side}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = SandpileError;

    /// Accepts the `Display` forms; `random` and `tiled-parallel` may omit
    /// their parameter (seed 0, default tile side).
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |a: &str| {
            a.parse::<u64>()
                .map_err(|e| SandpileError::Parse(format!("bad strategy parameter {a:?}: {e}")))
        };
        match (name, arg) {
            ("fifo", None) => Ok(Strategy::Fifo),
            ("lifo", None) => Ok(Strategy::Lifo),
            ("bulk-fifo", None) => Ok(Strategy::BulkFifo),
            ("random", None) => Ok(Strategy::Random { seed: 0 }),
            ("random", Some(a)) => Ok(Strategy::Random { seed: number(a)? }),
            ("tiled-parallel" | "tiled", None) => Ok(Strategy::TiledParallel {
                tile_side: DEFAULT_TILE_SIDE,
            }),
            ("tiled-parallel" | "tiled", Some(a)) => Ok(Strategy::TiledParallel {
                tile_side: number(a)? as usize,
            }),
            _ => Err(SandpileError::Parse(format!("unknown strategy {s:?}"))),
        }
    }
}

/// Outcome of one stabilization.
#[derive(Clone, Debug)]
pub struct StabilizationResult {
    pub final_config: SandpileConfig,
    pub odometer: Odometer,
    pub total_topplings: u64,
    /// Set when the budget ran out with active cells left.
    pub budget_exhausted: bool,
}

pub fn audit_enabled() -> bool {
    std::env::var(AUDIT_ENV).is_ok_and(|v| !v.is_empty() && v != "0")
}

/// Topples `p` `k` times at once, growing the explicit box if needed.
pub fn topple(c: &SandpileConfig, p: &LatticePoint, k: u64) -> Result<SandpileConfig> {
    if p.dim() != c.dim() {
        return Err(SandpileError::DimensionMismatch {
            expected: c.dim(),
            found: p.dim(),
        });
    }
    let required = c.threshold() * k;
    let height = c.height(p);
    if height < required {
        return Err(SandpileError::IllegalTopple {
            point: p.clone(),
            height,
            required,
        });
    }
    let mut out = c.clone();
    out.set_height(p, height - required);
    for q in p.neighbors() {
        out.add_at(&q, k);
    }
    Ok(out)
}

/// Stabilizes `c` with the given toppling order.
///
/// Fails only if the background itself is active (infinitely many active
/// cells). Running out of budget is reported through `budget_exhausted`.
pub fn stabilize(
    c: &SandpileConfig,
    strategy: Strategy,
    budget: u64,
) -> Result<StabilizationResult> {
    stabilize_audited(c, strategy, budget, audit_enabled())
}

pub fn stabilize_audited(
    c: &SandpileConfig,
    strategy: Strategy,
    budget: u64,
    audit: bool,
) -> Result<StabilizationResult> {
    if c.background() >= c.threshold() {
        return Err(SandpileError::UnstableBackground {
            background: c.background(),
            dim: c.dim(),
        });
    }
    let mut field = Field::new(c);
    let outcome = match strategy {
        Strategy::Fifo => drain(&mut field, &mut Fifo::default(), false, budget, audit),
        Strategy::Lifo => drain(&mut field, &mut Lifo::default(), false, budget, audit),
        Strategy::Random { seed } => {
            drain(&mut field, &mut RandomPick::new(seed), false, budget, audit)
        }
        Strategy::BulkFifo => drain(&mut field, &mut Fifo::default(), true, budget, audit),
        Strategy::TiledParallel { tile_side } => {
            return tiled::stabilize_tiled(c, tile_side, budget, Execution::Parallel, audit);
        }
    };
    let (final_config, odometer) = field.into_parts();
    Ok(StabilizationResult {
        final_config,
        odometer,
        total_topplings: outcome.topplings,
        budget_exhausted: outcome.exhausted,
    })
}

/// Stabilizes `c` starting from an arbitrary guess of its odometer.
///
/// The result is exactly that of [`stabilize`]; a good guess only saves
/// work. `total_topplings` is the odometer sum, which every legal order
/// shares. If correcting the guess would take more than `budget`
/// operations, falls back to a plain bulk-fifo run under the same budget.
pub fn stabilize_from_guess(
    c: &SandpileConfig,
    guess: &Odometer,
    budget: u64,
) -> Result<StabilizationResult> {
    if guess.dim() != c.dim() {
        return Err(SandpileError::DimensionMismatch {
            expected: c.dim(),
            found: guess.dim(),
        });
    }
    if c.background() >= c.threshold() {
        return Err(SandpileError::UnstableBackground {
            background: c.background(),
            dim: c.dim(),
        });
    }
    match warm::stabilize_from_guess(c, guess, budget) {
        Some(out) => Ok(StabilizationResult {
            total_topplings: out.odometer.total(),
            final_config: out.config,
            odometer: out.odometer,
            budget_exhausted: false,
        }),
        None => stabilize(c, Strategy::BulkFifo, budget),
    }
}

/// Tiled stabilization with an explicit choice of super-step execution.
pub fn stabilize_tiled(
    c: &SandpileConfig,
    tile_side: usize,
    budget: u64,
    execution: Execution,
) -> Result<StabilizationResult> {
    if c.background() >= c.threshold() {
        return Err(SandpileError::UnstableBackground {
            background: c.background(),
            dim: c.dim(),
        });
    }
    tiled::stabilize_tiled(c, tile_side, budget, execution, audit_enabled())
}

/// Checks `final = initial + L(odometer)` cell by cell, where
/// `L(u)(p) = -2d u(p) + sum of u over the neighbours of p`.
///
/// Returns the first cell where the identity fails.
pub fn conservation_violation(
    initial: &SandpileConfig,
    result: &StabilizationResult,
) -> Option<LatticePoint> {
    let fin = &result.final_config;
    let odo = &result.odometer;
    if fin.background() != initial.background() || fin.dim() != initial.dim() {
        return Some(LatticePoint::origin(initial.dim()));
    }
    let t = fin.threshold() as i128;
    // L(u) vanishes more than one cell away from the odometer's box
    let region = fin
        .bbox()
        .union(initial.bbox())
        .union(&odo.bbox().padded(1));
    region.points().find(|p| {
        let expected = initial.height(p) as i128 - t * odo.get(p) as i128 + odo.inflow(p) as i128;
        expected != fin.height(p) as i128
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::make_point_source;

    fn p(x: i64, y: i64) -> LatticePoint {
        (x, y).into()
    }

    #[test]
    fn single_topple() {
        let c = topple(&make_point_source(4, 0, 2), &p(0, 0), 1).unwrap();
        assert_eq!(c.height(&p(0, 0)), 0);
        for q in p(0, 0).neighbors() {
            assert_eq!(c.height(&q), 1);
        }
        assert_eq!(c.height(&p(1, 1)), 0);
    }

    #[test]
    fn bulk_topple_is_repeated_topple() {
        let c = make_point_source(9, 0, 2);
        let bulk = topple(&c, &p(0, 0), 2).unwrap();
        assert_eq!(bulk.height(&p(0, 0)), 1);
        assert_eq!(bulk.height(&p(0, 1)), 2);
        let twice = topple(&topple(&c, &p(0, 0), 1).unwrap(), &p(0, 0), 1).unwrap();
        assert_eq!(bulk, twice);
    }

    #[test]
    fn illegal_topple_is_reported() {
        let err = topple(&make_point_source(3, 0, 2), &p(0, 0), 1).unwrap_err();
        assert!(matches!(
            err,
            SandpileError::IllegalTopple {
                height: 3,
                required: 4,
                ..
            }
        ));
        assert!(topple(&make_point_source(7, 0, 2), &p(0, 0), 2).is_err());
    }

    #[test]
    fn strategy_text_forms() {
        for s in [
            Strategy::Fifo,
            Strategy::Lifo,
            Strategy::Random { seed: 42 },
            Strategy::BulkFifo,
            Strategy::TiledParallel { tile_side: 16 },
        ] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!(
            "random".parse::<Strategy>().unwrap(),
            Strategy::Random { seed: 0 }
        );
        assert_eq!(
            "tiled-parallel".parse::<Strategy>().unwrap(),
            Strategy::TiledParallel {
                tile_side: DEFAULT_TILE_SIDE
            }
        );
        assert!("fifo:3".parse::<Strategy>().is_err());
        assert!("depth-first".parse::<Strategy>().is_err());
    }

    #[test]
    fn four_on_ground_two() {
        let c = make_point_source(4, 2, 2);
        let r = stabilize(&c, Strategy::BulkFifo, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.total_topplings, 1);
        assert!(!r.budget_exhausted);
        assert_eq!(r.final_config.height(&p(0, 0)), 0);
        for q in p(0, 0).neighbors() {
            assert_eq!(r.final_config.height(&q), 3);
        }
        assert_eq!(r.final_config.height(&p(1, 1)), 2);
        assert_eq!(r.odometer.get(&p(0, 0)), 1);
        assert_eq!(r.odometer.total(), 1);
        assert!(conservation_violation(&c, &r).is_none());
    }

    #[test]
    fn stable_input_is_untouched() {
        let c = make_point_source(3, 2, 2);
        let r = stabilize(&c, Strategy::Fifo, DEFAULT_BUDGET).unwrap();
        assert_eq!(r.total_topplings, 0);
        assert_eq!(r.final_config, c);
        assert_eq!(r.odometer.support().count(), 0);
    }

    #[test]
    fn active_background_is_rejected() {
        let c = make_point_source(10, 4, 2);
        assert!(matches!(
            stabilize(&c, Strategy::BulkFifo, 10),
            Err(SandpileError::UnstableBackground { .. })
        ));
    }

    #[test]
    fn critical_background_runs_out_of_budget() {
        let c = make_point_source(10, 3, 2);
        for s in [Strategy::BulkFifo, Strategy::TiledParallel { tile_side: 8 }] {
            let r = stabilize(&c, s, 10_000).unwrap();
            assert!(r.budget_exhausted, "{s}");
            assert_eq!(r.total_topplings, 10_000, "{s}");
            assert!(conservation_violation(&c, &r).is_none(), "{s}");
        }
    }

    #[test]
    fn box_growth_keeps_state() {
        // large enough to force several rounds of padding
        let c = make_point_source(30_000, 0, 2);
        let r = stabilize(&c, Strategy::BulkFifo, DEFAULT_BUDGET).unwrap();
        assert!(r.final_config.is_stable());
        assert!(conservation_violation(&c, &r).is_none());
        assert_eq!(r.odometer.total(), r.total_topplings);
    }

    #[test]
    fn conservation_detects_tampering() {
        let c = make_point_source(64, 2, 2);
        let mut r = stabilize(&c, Strategy::BulkFifo, DEFAULT_BUDGET).unwrap();
        assert!(conservation_violation(&c, &r).is_none());
        r.final_config.add_at(&p(1, 0), 1);
        assert_eq!(conservation_violation(&c, &r), Some(p(1, 0)));
    }
}
