//! Benchmarks for the hot paths of the estimation pipeline: building the
//! kernel-weighted pre-periodogram aggregate, evaluating the local Whittle
//! objective, running one full fit, and integrating the causality measure.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use lgc_core::*;

fn demo_panel(t_len: usize, seed: u64) -> TimeSeriesPanel {
    simulate_tvvar(&ModelKind::ModelI.tv_var_spec(seed), t_len).unwrap()
}

fn bench_weighted_periodogram(c: &mut Criterion) {
    let panel = demo_panel(512, 1);
    let kernel = KernelSpec::epanechnikov(KernelSpec::default_bandwidth(512)).unwrap();
    let grid = FreqGrid::default_for_len(512);
    c.bench_function("weighted_pre_periodogram_T512", |b| {
        b.iter(|| weighted_pre_periodogram(black_box(&panel), 0.5, &kernel, &grid).unwrap())
    });
}

fn bench_objective_eval(c: &mut Criterion) {
    let panel = demo_panel(512, 2);
    let kernel = KernelSpec::epanechnikov(KernelSpec::default_bandwidth(512)).unwrap();
    let grid = FreqGrid::default_for_len(512);
    let objective = LocalObjective::build(&panel, 0.5, &kernel, &grid).unwrap();
    let a = RMat::from_rows(&[vec![-0.5, -0.2], vec![0.0, -0.5]]);
    let s = RMat::identity(2);
    c.bench_function("objective_eval_T512_N2048", |b| {
        b.iter(|| objective.value(black_box(&a), black_box(&s)))
    });
}

fn bench_whittle_fit(c: &mut Criterion) {
    let panel = demo_panel(512, 3);
    let kernel = KernelSpec::epanechnikov(KernelSpec::default_bandwidth(512)).unwrap();
    let grid = FreqGrid::default_for_len(512);
    let init = default_init(&panel, 0.5, &kernel).unwrap();
    c.bench_function("local_whittle_fit_T512", |b| {
        b.iter_batched(
            || init.clone(),
            |init| local_whittle_fit(black_box(&panel), 0.5, &kernel, &grid, &init).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_gc_measure(c: &mut Criterion) {
    let params = VarParams::new(
        RMat::from_rows(&[vec![-0.5, -0.3], vec![0.0, -0.5]]),
        RMat::identity(2),
    )
    .unwrap();
    let part = Partition::new(1, 1).unwrap();
    let grid = FreqGrid::new(1024).unwrap();
    c.bench_function("gc_measure_N1024", |b| {
        b.iter(|| gc_measure(black_box(&params), &part, &grid).unwrap())
    });
}

fn bench_asymptotic_variance(c: &mut Criterion) {
    let params = VarParams::new(RMat::diag(&[-0.5, -0.5]), RMat::identity(2)).unwrap();
    let kernel = KernelSpec::epanechnikov(0.2).unwrap();
    let grid = FreqGrid::new(512).unwrap();
    c.bench_function("asymptotic_variance_N512", |b| {
        b.iter(|| asymptotic_variance(black_box(&params), &kernel, &grid).unwrap())
    });
}

criterion_group!(
    benches,
    bench_weighted_periodogram,
    bench_objective_eval,
    bench_whittle_fit,
    bench_gc_measure,
    bench_asymptotic_variance
);
criterion_main!(benches);
