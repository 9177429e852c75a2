//! Hot-path benchmarks for the photonic simulation layer: compiling and
//! applying the gate, extracting processes, and chi-matrix construction.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ppbs_core::metrics::{bell_truth_table, optimize_corrections_with, CorrectionOptions};
use ppbs_core::qubit::random_pure_ket;
use ppbs_core::{build_ppbs_cz, chi_ideal_cz};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ETA: f64 = 1.0 / 3.0;

fn bench_gate_build(c: &mut Criterion) {
    c.bench_function("build_ppbs_cz ideal", |b| {
        b.iter(|| build_ppbs_cz(black_box(ETA), ETA, ETA, 1.0).unwrap())
    });
    c.bench_function("build_ppbs_cz partial overlap", |b| {
        b.iter(|| build_ppbs_cz(black_box(ETA), ETA, ETA, 0.9).unwrap())
    });
}

fn bench_gate_apply(c: &mut Criterion) {
    let gate = build_ppbs_cz(ETA, ETA, ETA, 0.9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ket = random_pure_ket(&mut rng);
    c.bench_function("apply_ket", |b| {
        b.iter(|| gate.apply_ket(black_box(&ket)).unwrap())
    });
    c.bench_function("process extraction", |b| {
        b.iter(|| gate.process().unwrap())
    });
    let process = gate.process().unwrap();
    c.bench_function("chi from process", |b| b.iter(|| process.chi().unwrap()));
}

fn bench_analysis(c: &mut Criterion) {
    let gate = build_ppbs_cz(ETA, ETA, ETA, 0.9).unwrap();
    c.bench_function("bell truth table", |b| {
        b.iter(|| bell_truth_table(black_box(&gate)).unwrap())
    });

    let detuned = build_ppbs_cz(0.28, 0.28, 0.29, 1.0).unwrap();
    let process = detuned.process().unwrap();
    let ideal = chi_ideal_cz();
    let opts = CorrectionOptions {
        restarts: 2,
        max_evals: 400,
        ..Default::default()
    };
    c.bench_function("correction search (2 restarts)", |b| {
        b.iter(|| optimize_corrections_with(black_box(&process), &ideal, &opts).unwrap())
    });
}

criterion_group!(benches, bench_gate_build, bench_gate_apply, bench_analysis);
criterion_main!(benches);
