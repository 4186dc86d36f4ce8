//! Scenario-batch throughput: the rayon data-parallel runner against the
//! sequential fallback, over one identical batch of compliant scenarios.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ebbflow_harness::gen::compliant_scenario;
use ebbflow_simnet::scenario::Scenario;
use ebbflow_simnet::world;

fn batch(size: usize) -> Vec<Scenario> {
    (0..size as u64)
        .map(|seed| compliant_scenario(4 + (seed as usize % 6), 8, 1, seed))
        .collect()
}

fn bench_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("scenario-batch");
    group.sample_size(10);
    for size in [4usize, 16] {
        let scenarios = batch(size);
        group.bench_with_input(BenchmarkId::new("parallel", size), &scenarios, |b, s| {
            b.iter(|| world::run_batch(s))
        });
        group.bench_with_input(BenchmarkId::new("serial", size), &scenarios, |b, s| {
            b.iter(|| world::run_batch_serial(s))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
