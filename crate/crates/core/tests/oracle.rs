//! Engine output against a naive single-toppling reference and against
//! values worked out independently of the engine.

use std::collections::BTreeMap;

use sandpile::engine::{
    conservation_violation, stabilize_from_guess, stabilize_tiled, Execution, DEFAULT_BUDGET,
};
use sandpile::experiments::{random_config, solve_point_source};
use sandpile::geometry::{radius, toppled_cluster};
use sandpile::{make_point_source, stabilize, LatticePoint, Odometer, SandpileConfig, Strategy};

type Cells = BTreeMap<Vec<i64>, u64>;

/// Topples one unstable cell at a time until nothing is unstable.
fn reference(c: &SandpileConfig) -> (Cells, Cells) {
    let d = c.dim();
    let thr = 2 * d as u64;
    let bg = c.background();
    let mut heights: Cells = c
        .bbox()
        .points()
        .map(|p| (p.coords().to_vec(), c.height(&p)))
        .collect();
    let mut odometer = Cells::new();
    while let Some(p) = heights
        .iter()
        .find(|(_, &h)| h >= thr)
        .map(|(p, _)| p.clone())
    {
        *heights.get_mut(&p).unwrap() -= thr;
        *odometer.entry(p.clone()).or_default() += 1;
        for a in 0..d {
            for s in [-1, 1] {
                let mut q = p.clone();
                q[a] += s;
                *heights.entry(q).or_insert(bg) += 1;
            }
        }
    }
    (heights, odometer)
}

fn assert_matches(c: &SandpileConfig, strategy: Strategy) {
    let (heights, odometer) = reference(c);
    let r = stabilize(c, strategy, DEFAULT_BUDGET).unwrap();
    assert!(!r.budget_exhausted);
    for (p, &h) in &heights {
        assert_eq!(
            r.final_config.height(&LatticePoint::new(p)),
            h,
            "{strategy} height at {p:?}"
        );
    }
    for (p, k) in r.odometer.support() {
        assert_eq!(
            odometer.get(p.coords()).copied().unwrap_or(0),
            k,
            "{strategy} odometer at {p}"
        );
    }
    assert_eq!(r.odometer.total(), odometer.values().sum::<u64>());
    assert_eq!(r.total_topplings, r.odometer.total());
    assert_eq!(conservation_violation(c, &r), None);
}

const ALL: [Strategy; 6] = [
    Strategy::Fifo,
    Strategy::Lifo,
    Strategy::Random { seed: 3 },
    Strategy::BulkFifo,
    Strategy::TiledParallel { tile_side: 4 },
    Strategy::TiledParallel { tile_side: 16 },
];

#[test]
fn every_strategy_matches_reference_on_random_configs() {
    for seed in 0..25 {
        let c = random_config(seed);
        for s in ALL {
            assert_matches(&c, s);
        }
    }
}

#[test]
fn every_strategy_matches_reference_on_point_sources() {
    for (n, h, d) in [
        (16, 0, 2),
        (64, 2, 2),
        (11, 0, 1),
        (12, 0, 1),
        (100, 4, 3),
        (30, 0, 3),
        (9, 1, 2),
    ] {
        for s in ALL {
            assert_matches(&make_point_source(n, h, d), s);
        }
    }
}

fn summary(n: u64, h: u64, d: usize) -> (u64, u64, usize, u64) {
    let r = stabilize(
        &make_point_source(n, h, d),
        Strategy::BulkFifo,
        DEFAULT_BUDGET,
    )
    .unwrap();
    let toppled = toppled_cluster(&r);
    (
        r.total_topplings,
        radius(&toppled),
        toppled.len(),
        r.odometer.get(&LatticePoint::origin(d)),
    )
}

#[test]
fn frozen_point_source_values() {
    // (total topplings, radius, toppled cells, origin count)
    assert_eq!(summary(16, 0, 2), (9, 2, 5, 5));
    assert_eq!(summary(64, 2, 2), (553, 6, 121, 33));
    assert_eq!(summary(1000, 2, 2), (124_001, 25, 2401, 729));
    assert_eq!(summary(200, 0, 2), (758, 5, 69, 90));
    assert_eq!(summary(11, 0, 1), (55, 5, 9, 15));
    assert_eq!(summary(12, 0, 1), (91, 6, 11, 21));
    assert_eq!(summary(100, 4, 3), (1421, 5, 729, 25));
    assert_eq!(summary(30, 0, 3), (5, 1, 1, 5));
}

#[test]
fn sixteen_grains_final_picture() {
    let r = stabilize(&make_point_source(16, 0, 2), Strategy::Fifo, DEFAULT_BUDGET).unwrap();
    let rows = [
        [0, 0, 1, 0, 0],
        [0, 2, 1, 2, 0],
        [1, 1, 0, 1, 1],
        [0, 2, 1, 2, 0],
        [0, 0, 1, 0, 0],
    ];
    for (i, row) in rows.iter().enumerate() {
        let y = 2 - i as i64;
        for (j, &h) in row.iter().enumerate() {
            let x = j as i64 - 2;
            assert_eq!(r.final_config.height(&(x, y).into()), h, "({x},{y})");
        }
    }
}

#[test]
fn line_of_ones_in_one_dimension() {
    let r = stabilize(
        &make_point_source(11, 0, 1),
        Strategy::BulkFifo,
        DEFAULT_BUDGET,
    )
    .unwrap();
    let got: Vec<u64> = (-7..=7)
        .map(|x| r.final_config.height(&LatticePoint::new(&[x])))
        .collect();
    let mut want = vec![0; 15];
    want[2..13].fill(1);
    assert_eq!(got, want);
}

#[test]
fn tiled_execution_modes_agree() {
    let c = make_point_source(5000, 2, 2);
    let a = stabilize_tiled(&c, 8, DEFAULT_BUDGET, Execution::Parallel).unwrap();
    let b = stabilize_tiled(&c, 8, DEFAULT_BUDGET, Execution::Sequential).unwrap();
    let f = stabilize(&c, Strategy::Fifo, DEFAULT_BUDGET).unwrap();
    assert_eq!(a.final_config, f.final_config);
    assert_eq!(b.final_config, f.final_config);
    assert_eq!(a.odometer, f.odometer);
    assert_eq!(b.odometer, f.odometer);
}

#[test]
fn warm_start_from_exact_and_crude_guesses() {
    let c = make_point_source(3000, 2, 2);
    let plain = stabilize(&c, Strategy::Fifo, DEFAULT_BUDGET).unwrap();
    let exact = stabilize_from_guess(&c, &plain.odometer, DEFAULT_BUDGET).unwrap();
    assert_eq!(exact.final_config, plain.final_config);
    assert_eq!(exact.odometer, plain.odometer);

    // far too large everywhere on a wide box
    let mut high = Odometer::zero(sandpile::BoundingBox::centered(2, 40));
    for p in sandpile::BoundingBox::centered(2, 40).points() {
        high.add(&p, 5000);
    }
    let r = stabilize_from_guess(&c, &high, DEFAULT_BUDGET).unwrap();
    assert_eq!(r.final_config, plain.final_config);
    assert_eq!(r.odometer, plain.odometer);
    assert_eq!(r.total_topplings, plain.total_topplings);
}

#[test]
fn budget_stops_an_exploding_run() {
    let r = stabilize(&make_point_source(10, 3, 2), Strategy::BulkFifo, 100_000).unwrap();
    assert!(r.budget_exhausted);
    assert!(r.total_topplings <= 100_000);
}

#[test]
fn coarse_to_fine_matches_plain_runs() {
    for (n, h) in [(40_000, 2), (100_000, 0)] {
        let plain = stabilize(
            &make_point_source(n, h, 2),
            Strategy::BulkFifo,
            DEFAULT_BUDGET,
        )
        .unwrap();
        let fast = solve_point_source(n, h, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(fast.final_config, plain.final_config, "n={n} h={h}");
        assert_eq!(fast.odometer, plain.odometer, "n={n} h={h}");
        assert_eq!(fast.total_topplings, plain.total_topplings);
    }
}
