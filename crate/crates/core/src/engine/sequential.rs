//! Worklist-driven stabilization on a single growing dense field.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::field::Field;

pub(crate) trait Worklist {
    fn push(&mut self, idx: usize);
    fn pop(&mut self) -> Option<usize>;
    fn remap(&mut self, f: &dyn Fn(usize) -> usize);
}

#[derive(Default)]
pub(crate) struct Fifo(VecDeque<usize>);

impl Worklist for Fifo {
    fn push(&mut self, idx: usize) {
        self.0.push_back(idx);
    }
    fn pop(&mut self) -> Option<usize> {
        self.0.pop_front()
    }
    fn remap(&mut self, f: &dyn Fn(usize) -> usize) {
        self.0.iter_mut().for_each(|i| *i = f(*i));
    }
}

#[derive(Default)]
pub(crate) struct Lifo(Vec<usize>);

impl Worklist for Lifo {
    fn push(&mut self, idx: usize) {
        self.0.push(idx);
    }
    fn pop(&mut self) -> Option<usize> {
        self.0.pop()
    }
    fn remap(&mut self, f: &dyn Fn(usize) -> usize) {
        self.0.iter_mut().for_each(|i| *i = f(*i));
    }
}

/// Picks a uniformly random active cell at every step.
pub(crate) struct RandomPick {
    items: Vec<usize>,
    rng: ChaCha8Rng,
}

impl RandomPick {
    pub fn new(seed: u64) -> Self {
        RandomPick {
            items: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Worklist for RandomPick {
    fn push(&mut self, idx: usize) {
        self.items.push(idx);
    }
    fn pop(&mut self) -> Option<usize> {
        if self.items.is_empty() {
            return None;
        }
        let pick = self.rng.random_range(0..self.items.len());
        Some(self.items.swap_remove(pick))
    }
    fn remap(&mut self, f: &dyn Fn(usize) -> usize) {
        self.items.iter_mut().for_each(|i| *i = f(*i));
    }
}

pub(crate) struct DrainOutcome {
    pub topplings: u64,
    pub exhausted: bool,
}

/// Topples until the worklist is empty or the budget runs out.
///
/// With `bulk` every pop fires floor(h / 2d) times; otherwise once, and a
/// still-active cell goes back on the worklist. A cell is pushed exactly
/// when it becomes active, so every active cell is queued once.
pub(crate) fn drain<W: Worklist>(
    field: &mut Field,
    work: &mut W,
    bulk: bool,
    budget: u64,
    audit: bool,
) -> DrainOutcome {
    for i in 0..field.heights.len() {
        if field.heights[i] >= field.threshold {
            work.push(i);
        }
    }
    match field.offsets.len() {
        2 => run::<W, 2>(field, work, bulk, budget, audit),
        4 => run::<W, 4>(field, work, bulk, budget, audit),
        6 => run::<W, 6>(field, work, bulk, budget, audit),
        8 => run::<W, 8>(field, work, bulk, budget, audit),
        _ => run_generic(field, work, bulk, budget, audit),
    }
}

/// Hot loop for `N` = 2d neighbours; the threshold is the constant `N`.
fn run<W: Worklist, const N: usize>(
    field: &mut Field,
    work: &mut W,
    bulk: bool,
    budget: u64,
    audit: bool,
) -> DrainOutcome {
    let threshold = N as u64;
    debug_assert_eq!(threshold, field.threshold);
    let load = |f: &Field| -> [isize; N] { f.offsets[..].try_into().expect("2d offsets") };
    let mut offsets = load(field);
    let mut remaining = budget;
    let mut exhausted = false;

    while let Some(mut i) = work.pop() {
        let h = field.heights[i];
        debug_assert!(h >= threshold, "queued cells are active");
        if remaining == 0 {
            work.push(i);
            exhausted = true;
            break;
        }
        if field.edge[i] {
            let remap = field.grow();
            i = remap(i);
            work.remap(&remap);
            offsets = load(field);
        }
        let k = if bulk {
            (h / threshold).min(remaining)
        } else {
            1
        };
        if audit {
            check_legal(field, i, h, k);
        }
        remaining -= k;
        let left = h - k * threshold;
        field.odometer[i] += k;
        field.heights[i] = left;
        scatter(&mut field.heights, work, i, &offsets, k, threshold);
        if left >= threshold {
            work.push(i);
        }
    }

    DrainOutcome {
        topplings: budget - remaining,
        exhausted,
    }
}

fn run_generic<W: Worklist>(
    field: &mut Field,
    work: &mut W,
    bulk: bool,
    budget: u64,
    audit: bool,
) -> DrainOutcome {
    let threshold = field.threshold;
    let mut remaining = budget;
    let mut exhausted = false;

    while let Some(mut i) = work.pop() {
        let h = field.heights[i];
        if remaining == 0 {
            work.push(i);
            exhausted = true;
            break;
        }
        if field.edge[i] {
            let remap = field.grow();
            i = remap(i);
            work.remap(&remap);
        }
        let k = if bulk {
            (h / threshold).min(remaining)
        } else {
            1
        };
        if audit {
            check_legal(field, i, h, k);
        }
        remaining -= k;
        let left = h - k * threshold;
        field.odometer[i] += k;
        field.heights[i] = left;
        let offsets = field.offsets.clone();
        scatter(&mut field.heights, work, i, &offsets, k, threshold);
        if left >= threshold {
            work.push(i);
        }
    }

    DrainOutcome {
        topplings: budget - remaining,
        exhausted,
    }
}

fn check_legal(field: &Field, i: usize, h: u64, k: u64) {
    assert!(
        h >= k * field.threshold,
        "illegal toppling of {} at {:?}: height {}",
        k,
        field.bbox.point_at(i),
        h
    );
}

#[inline(always)]
fn scatter<W: Worklist>(
    heights: &mut [u64],
    work: &mut W,
    i: usize,
    offsets: &[isize],
    k: u64,
    threshold: u64,
) {
    for &off in offsets {
        let j = i.wrapping_add_signed(off);
        debug_assert!(j < heights.len());
        // SAFETY: `i` is not an edge cell, so every neighbour lies in the box.
        let cell = unsafe { heights.get_unchecked_mut(j) };
        let before = *cell;
        *cell = before + k;
        if before < threshold && before + k >= threshold {
            work.push(j);
        }
    }
}
