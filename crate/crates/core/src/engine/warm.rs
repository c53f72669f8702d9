//! Exact stabilization seeded with an arbitrary odometer guess.
//!
//! Facts used, with `u*` the true odometer of `c`:
//!
//! * any `U >= 0` with `c + L(U) <= 2d - 1` everywhere satisfies `U >= u*`
//!   (least action);
//! * while that holds, a cell of negative height has `U > u*` there, and
//!   untoppling it `ceil(-h / 2d)` times keeps `U >= u*`;
//! * if `U >= u*` and `U != u*`, the cells where `U - u*` is largest form
//!   a forbidden subconfiguration of `c + L(U)` inside `supp(U)`, so a
//!   burning test that clears all of `supp(U)` proves `U = u*`.
//!
//! So: topple the guess into an upper bound, then alternate untoppling
//! negative cells with burning, untoppling any unburnt residue once. Every
//! step lowers `sum U` while keeping `U >= u*`, hence the loop ends at `u*`.

use std::collections::VecDeque;

use crate::config::SandpileConfig;
use crate::grid::DenseGrid;
use crate::odometer::Odometer;

use super::field::Field;

pub(crate) struct WarmOutcome {
    pub config: SandpileConfig,
    pub odometer: Odometer,
}

/// Returns `None` if the topplings plus untopplings performed would
/// exceed `budget`.
pub(crate) fn stabilize_from_guess(
    c: &SandpileConfig,
    guess: &Odometer,
    budget: u64,
) -> Option<WarmOutcome> {
    let mut field = seed(c, guess);
    let mut work = 0u64;
    let thr = field.threshold as i64;

    topple_all(&mut field, &mut work, budget)?;
    // residue untopple depth; grows while it pays off, never after a miss
    let mut step = 1u64;
    let mut may_grow = true;
    loop {
        untopple_negative(&mut field, &mut work, budget)?;
        let residue = unburnt(&field);
        if residue.is_empty() {
            break;
        }
        let floor = residue
            .iter()
            .map(|&i| field.odometer[i])
            .min()
            .unwrap_or(0);
        let t = step.min(floor).max(1);
        let before: u64 = field.odometer.iter().sum();
        let spent_before = work;
        work += t * residue.len() as u64;
        if work > budget {
            return None;
        }
        let k = t as i64;
        for &i in &residue {
            field.odometer[i] -= t;
            field.heights[i] += thr * k;
            for &off in &field.offsets {
                field.heights[i.wrapping_add_signed(off)] -= k;
            }
        }
        if t > 1 {
            topple_all(&mut field, &mut work, budget)?;
        }
        // keep deepening only while at least half the operations stick
        let after: u64 = field.odometer.iter().sum();
        let gain = before.saturating_sub(after);
        if 2 * gain >= work - spent_before {
            if may_grow {
                step = step.saturating_mul(2);
            }
        } else {
            step = (step / 2).max(1);
            may_grow = false;
        }
    }

    let Field {
        bbox,
        heights,
        odometer,
        background,
        ..
    } = field;
    let heights: Vec<u64> = heights
        .into_iter()
        .map(|h| {
            debug_assert!((0..thr).contains(&h));
            h as u64
        })
        .collect();
    Some(WarmOutcome {
        config: SandpileConfig::from_grid(DenseGrid::from_raw(
            bbox.clone(),
            heights,
            background as u64,
        )),
        odometer: Odometer::from_grid(DenseGrid::from_raw(bbox, odometer, 0)),
    })
}

/// Heights `c + L(guess)` over a box holding both supports plus a margin.
fn seed(c: &SandpileConfig, guess: &Odometer) -> Field<i64> {
    let bbox = c.bbox().union(guess.bbox()).padded(1);
    let heights: Vec<i64> = bbox.points().map(|p| c.height(&p) as i64).collect();
    let odometer: Vec<u64> = bbox.points().map(|p| guess.get(&p)).collect();
    let mut field = Field::from_parts(
        bbox,
        c.threshold(),
        c.background() as i64,
        heights,
        odometer,
    );
    let thr = field.threshold as i64;
    for i in 0..field.heights.len() {
        let g = field.odometer[i] as i64;
        if g > 0 {
            field.heights[i] -= thr * g;
            for &off in &field.offsets {
                field.heights[i.wrapping_add_signed(off)] += g;
            }
        }
    }
    field
}

fn topple_all(field: &mut Field<i64>, work: &mut u64, budget: u64) -> Option<()> {
    let thr = field.threshold as i64;
    let mut queue: VecDeque<usize> = (0..field.heights.len())
        .filter(|&i| field.heights[i] >= thr)
        .collect();
    while let Some(mut i) = queue.pop_front() {
        if field.edge[i] {
            let remap = field.grow();
            i = remap(i);
            queue.iter_mut().for_each(|j| *j = remap(*j));
        }
        let h = field.heights[i];
        let k = h / thr;
        *work += k as u64;
        if *work > budget {
            return None;
        }
        field.heights[i] = h - k * thr;
        field.odometer[i] += k as u64;
        for &off in &field.offsets {
            let j = i.wrapping_add_signed(off);
            let before = field.heights[j];
            field.heights[j] = before + k;
            if before < thr && before + k >= thr {
                queue.push_back(j);
            }
        }
    }
    Some(())
}

/// Untopples cells of negative height until none is left. Heights never
/// exceed 2d - 1 during this phase.
fn untopple_negative(field: &mut Field<i64>, work: &mut u64, budget: u64) -> Option<()> {
    let thr = field.threshold as i64;
    let mut queue: VecDeque<usize> = (0..field.heights.len())
        .filter(|&i| field.heights[i] < 0)
        .collect();
    while let Some(i) = queue.pop_front() {
        let h = field.heights[i];
        let k = (-h + thr - 1) / thr;
        // a violation here would contradict U >= u*
        debug_assert!(field.odometer[i] >= k as u64 && !field.edge[i]);
        if field.odometer[i] < k as u64 {
            return None;
        }
        *work += k as u64;
        if *work > budget {
            return None;
        }
        field.heights[i] = h + k * thr;
        field.odometer[i] -= k as u64;
        for &off in &field.offsets {
            let j = i.wrapping_add_signed(off);
            let before = field.heights[j];
            field.heights[j] = before - k;
            if before >= 0 && before - k < 0 {
                queue.push_back(j);
            }
        }
    }
    Some(())
}

/// Burning test on `supp(U)`: a cell burns once its height reaches the
/// number of its unburnt support neighbours. Returns the unburnt cells.
fn unburnt(field: &Field<i64>) -> Vec<usize> {
    let n = field.heights.len();
    let in_support = |i: usize| field.odometer[i] > 0;
    let mut degree = vec![0i64; n];
    let mut burnt = vec![false; n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        if in_support(i) {
            degree[i] = field
                .offsets
                .iter()
                .filter(|&&off| in_support(i.wrapping_add_signed(off)))
                .count() as i64;
            if field.heights[i] >= degree[i] {
                burnt[i] = true;
                queue.push_back(i);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        for &off in &field.offsets {
            let j = i.wrapping_add_signed(off);
            if in_support(j) && !burnt[j] {
                degree[j] -= 1;
                if field.heights[j] >= degree[j] {
                    burnt[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    (0..n).filter(|&i| in_support(i) && !burnt[i]).collect()
}
