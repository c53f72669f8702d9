//! Point sources solved coarse to fine: the odometer for `n / 2^d`
//! particles, stretched by 2 in space and 4 in value, seeds the run for `n`.
//!
//! The stretched odometer tends to overshoot (it is convex near the source
//! and its support comes out slightly wide), and overshoot is the costly
//! direction to correct, so the guess takes the smallest coarse neighbour
//! and is shaded down by 2%.

use crate::config::make_point_source;
use crate::engine::{stabilize, stabilize_from_guess, StabilizationResult, Strategy};
use crate::error::Result;
use crate::lattice::{BoundingBox, LatticePoint};
use crate::odometer::Odometer;

/// Below this many particles a plain bulk-fifo run is cheap enough.
pub const WARM_START_MIN: u64 = 1 << 14;

/// Exact stabilization of a point source; same output as bulk-fifo.
pub fn solve_point_source(n: u64, h: u64, d: usize, budget: u64) -> Result<StabilizationResult> {
    let coarse_n = n >> d;
    if n < WARM_START_MIN || coarse_n == 0 {
        return stabilize(&make_point_source(n, h, d), Strategy::BulkFifo, budget);
    }
    let coarse = solve_point_source(coarse_n, h, d, budget)?;
    if coarse.budget_exhausted {
        return stabilize(&make_point_source(n, h, d), Strategy::BulkFifo, budget);
    }
    stabilize_from_guess(
        &make_point_source(n, h, d),
        &upscale(&coarse.odometer),
        budget,
    )
}

/// `g(p) = 0.98 * 4 * min of u over the coarse cells nearest p / 2`.
pub fn upscale(u: &Odometer) -> Odometer {
    let b = u.bbox();
    let lo: Vec<i64> = b.lo().iter().map(|l| 2 * l - 1).collect();
    let hi: Vec<i64> = b.hi().iter().map(|h| 2 * h + 1).collect();
    let fine = BoundingBox::new(&lo, &hi).expect("scaled box is valid");
    let mut out = Odometer::zero(fine.clone());
    let dim = u.dim();
    for p in fine.points() {
        let odd: Vec<usize> = (0..dim).filter(|&a| p.coords()[a] % 2 != 0).collect();
        let base: Vec<i64> = p.coords().iter().map(|c| c.div_euclid(2)).collect();
        let mut least = u64::MAX;
        for mask in 0..1usize << odd.len() {
            let mut q = base.clone();
            for (bit, &a) in odd.iter().enumerate() {
                q[a] += ((mask >> bit) & 1) as i64;
            }
            least = least.min(u.get(&LatticePoint::new(&q)));
        }
        let g = 4 * least - 4 * least / 50;
        if g > 0 {
            out.add(&p, g);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upscale_of_a_single_count() {
        let mut u = Odometer::zero(BoundingBox::origin(2));
        u.add(&LatticePoint::origin(2), 3);
        let g = upscale(&u);
        assert_eq!(g.get(&(0, 0).into()), 12);
        assert_eq!(g.get(&(1, 0).into()), 0);
        assert_eq!(g.get(&(-1, 1).into()), 0);

        let mut u = Odometer::zero(BoundingBox::centered(2, 1));
        for p in BoundingBox::centered(2, 1).points() {
            u.add(&p, 100);
        }
        u.add(&LatticePoint::origin(2), 100);
        let g = upscale(&u);
        assert_eq!(g.get(&(0, 0).into()), 784);
        assert_eq!(g.get(&(1, 1).into()), 392);
        assert_eq!(g.get(&(2, 0).into()), 392);
        assert_eq!(g.get(&(3, 0).into()), 0);
    }
}
