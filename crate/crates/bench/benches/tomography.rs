//! Benchmarks for the maximum-likelihood fits: state reconstruction at
//! realistic count scales and the full process fit.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ppbs_core::tomo::{
    preparations_minimal, reconstruct_process, reconstruct_state, reconstruct_state_with,
    settings_overcomplete, simulate_counts, ReconstructOptions,
};
use ppbs_core::{build_ppbs_cz, source_state, TwoQubitState};

const ETA: f64 = 1.0 / 3.0;

fn bench_state_fit(c: &mut Criterion) {
    let truth = source_state(0.3);
    let settings = settings_overcomplete();
    let records = simulate_counts(&truth, &settings, 1e5, 11).unwrap();

    c.bench_function("state fit, cold start", |b| {
        b.iter(|| reconstruct_state(black_box(&records)).unwrap())
    });

    let point = reconstruct_state(&records).unwrap();
    let warm = *point.state.matrix();
    c.bench_function("state fit, warm start", |b| {
        b.iter(|| {
            let opts = ReconstructOptions {
                starts: 1,
                warm_start: Some(warm),
                ..Default::default()
            };
            reconstruct_state_with(black_box(&records), &opts).unwrap()
        })
    });
}

fn bench_process_fit(c: &mut Criterion) {
    let gate = build_ppbs_cz(ETA, ETA, ETA, 0.9).unwrap();
    let process = gate.process().unwrap();
    let preps = preparations_minimal();
    let outputs: Vec<TwoQubitState> = preps.iter().map(|p| process.apply(p).unwrap().0).collect();

    let mut group = c.benchmark_group("process");
    group.sample_size(10);
    group.bench_function("process fit, noiseless outputs", |b| {
        b.iter(|| reconstruct_process(black_box(&preps), &outputs).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_state_fit, bench_process_fit);
criterion_main!(benches);
