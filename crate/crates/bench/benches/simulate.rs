use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use mflq_bench::benchmark_law;
use mflq_core::simulate::{simulate_population, Record, SimConfig};
use mflq_core::model::presets;
use mflq_core::riccati::{feedback_law, solve_riccati, RangePolicy, TimeGrid};
use mflq_core::verify::{epsilon_sweep, stationarity_residual};

fn population(c: &mut Criterion) {
    let steps = 1000;
    let (params, law) = benchmark_law(steps);
    let mut group = c.benchmark_group("simulate_population");
    for agents in [10, 50, 200] {
        let cfg = SimConfig::new(&params, agents, steps, 1, 1, None)
            .unwrap()
            .with_record(Record::MeanOnly);
        group.throughput(Throughput::Elements((agents * steps) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(agents), &cfg, |b, cfg| {
            b.iter(|| simulate_population(black_box(&params), &law, cfg, 0).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let steps = 500;
    let (params, law) = benchmark_law(steps);
    let cfg = SimConfig::new(&params, 8, steps, 8, 1, None).unwrap();
    let mut group = c.benchmark_group("epsilon_sweep");
    group.sample_size(10);
    group.bench_function("8 replications, N = 8..64", |b| {
        b.iter(|| epsilon_sweep(&params, &law, &cfg, black_box(&[8, 16, 32, 64])).unwrap())
    });
    group.finish();
}

fn residual(c: &mut Criterion) {
    let steps = 2000;
    let params = presets::paper_sec4();
    let grid = TimeGrid::new(10.0, steps).unwrap();
    let sol = solve_riccati(&params, &grid, RangePolicy::Strict).unwrap();
    let law = feedback_law(&sol, &params).unwrap();
    let cfg = SimConfig::new(&params, 50, steps, 1, 1, None).unwrap();
    let paths = vec![simulate_population(&params, &law, &cfg, 0).unwrap()];
    c.bench_function("stationarity_residual 50 agents", |b| {
        b.iter(|| stationarity_residual(black_box(&paths), &sol, &params).unwrap())
    });
}

criterion_group!(benches, population, sweep, residual);
criterion_main!(benches);
