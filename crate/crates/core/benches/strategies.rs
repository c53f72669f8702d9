use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sandpile::engine::{stabilize_tiled, Execution, DEFAULT_BUDGET};
use sandpile::experiments::sweep_records;
use sandpile::{make_point_source, stabilize, Strategy};

fn sequential_orders(c: &mut Criterion) {
    let mut group = c.benchmark_group("sequential");
    group.sample_size(10);
    for n in [5_000u64, 20_000] {
        let config = make_point_source(n, 2, 2);
        for strategy in [Strategy::Fifo, Strategy::BulkFifo] {
            group.bench_with_input(
                BenchmarkId::new(strategy.to_string(), n),
                &config,
                |b, c| b.iter(|| stabilize(c, strategy, DEFAULT_BUDGET).unwrap()),
            );
        }
    }
    group.finish();
}

fn tiled_parallel_vs_sequential(c: &mut Criterion) {
    let mut group = c.benchmark_group("tiled");
    group.sample_size(10);
    for n in [5_000u64, 20_000] {
        let config = make_point_source(n, 2, 2);
        for (name, execution) in [
            ("parallel", Execution::Parallel),
            ("sequential", Execution::Sequential),
        ] {
            group.bench_with_input(BenchmarkId::new(name, n), &config, |b, c| {
                b.iter(|| stabilize_tiled(c, 32, DEFAULT_BUDGET, execution).unwrap())
            });
        }
    }
    group.finish();
}

// sweep entries run on rayon when the `parallel` feature is on; compare
// with `cargo bench --no-default-features`
fn sweep_entries(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    let sizes = [2_000u64, 4_000, 8_000, 16_000];
    group.bench_function("h2_d2", |b| {
        b.iter(|| sweep_records(&sizes, 2, 2, Strategy::BulkFifo, DEFAULT_BUDGET).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    sequential_orders,
    tiled_parallel_vs_sequential,
    sweep_entries
);
criterion_main!(benches);
