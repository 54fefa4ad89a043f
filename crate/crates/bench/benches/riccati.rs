use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mflq_core::model::{presets, Horizon, Signal};
use mflq_core::riccati::{solve_riccati, RangePolicy, TimeGrid};
use mflq_core::stationary::{solve_stationary, StationaryOptions};

fn finite_horizon(c: &mut Criterion) {
    let params = presets::paper_sec4();
    let mut group = c.benchmark_group("solve_riccati");
    for steps in [500, 2000, 8000] {
        let grid = TimeGrid::new(10.0, steps).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(steps), &grid, |b, grid| {
            b.iter(|| solve_riccati(black_box(&params), grid, RangePolicy::Strict).unwrap())
        });
    }
    group.finish();
}

fn stationary(c: &mut Criterion) {
    let mut params = presets::paper_sec4();
    params.horizon = Horizon::Infinite;
    params.drift_offset = Signal::zero(2);
    params.noise_offset = Signal::zero(2);
    params.common_noise_offset = Signal::zero(2);
    params.target = Signal::zero(2);
    let opts = StationaryOptions::default();
    c.bench_function("solve_stationary", |b| {
        b.iter(|| solve_stationary(black_box(&params), &opts).unwrap())
    });
}

criterion_group!(benches, finite_horizon, stationary);
criterion_main!(benches);
