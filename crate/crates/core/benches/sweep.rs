//! Compares the rayon-parallel sweep against the sequential fallback on a
//! small but realistic grid. Run with `cargo bench -p prefdp`; build with
//! `--no-default-features` to measure the crate compiled without rayon.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use prefdp::datagen::PreferenceModel;
use prefdp::experiment::{run_sweep, run_sweep_sequential};
use prefdp::{EstimatorKind, ExperimentConfig, StepSchedule};

fn bench_config() -> ExperimentConfig {
    ExperimentConfig {
        d: 5,
        n_values: vec![2000],
        epsilon_values: vec![1.0],
        delta: 0.001,
        estimators: vec![EstimatorKind::DebiasedRr, EstimatorKind::SgdRr],
        repetitions: 8,
        base_seed: 17,
        model: PreferenceModel::Btl,
        k: 2,
        step_schedule: StepSchedule::InverseT,
        output_path: "bench-unused.csv".into(),
    }
}

fn sweep_benches(c: &mut Criterion) {
    let cfg = bench_config();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("default", |b| {
        b.iter(|| run_sweep(black_box(&cfg)).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| run_sweep_sequential(black_box(&cfg)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sweep_benches);
criterion_main!(benches);
