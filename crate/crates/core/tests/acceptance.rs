//! End-to-end acceptance gate for the toolkit.
//!
//! Each test checks one headline guarantee at its stated tolerance and time
//! budget and prints a single summary line. Run with
//! `cargo test -p ppbs-core --test acceptance -- --nocapture` to see the
//! per-criterion report.

use std::time::Instant;

use ppbs_core::fock::{evolve, ModeLabel, OccupancyPattern, PhotonicState, Polarization};
use ppbs_core::gates::{build_interferometric_cz, build_ppbs_cz, source_state};
use ppbs_core::metrics::{
    average_gate_fidelity, bell_truth_table, optimize_corrections, process_fidelity,
    state_fidelity,
};
use ppbs_core::optics::{internal_amplitudes, Circuit, Element, PhotonRole};
use ppbs_core::process::chi_ideal_cz;
use ppbs_core::qubit::{cz, random_pure_ket, C64};
use ppbs_core::tomo::{
    monte_carlo_errors, preparations_minimal, reconstruct_process, reconstruct_state,
    reconstruct_state_with, settings_overcomplete, simulate_counts, ReconstructOptions,
};
use ppbs_core::TwoQubitState;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ETA: f64 = 1.0 / 3.0;

fn report(n: usize, name: &str, detail: &str, started: Instant) {
    println!(
        "=== criterion {n}: {name} ... PASS ({detail}, {:.2} s)",
        started.elapsed().as_secs_f64()
    );
}

fn budget(n: usize, started: Instant, seconds: f64) {
    let dt = started.elapsed().as_secs_f64();
    assert!(
        dt < seconds,
        "criterion {n} took {dt:.2} s, budget {seconds} s"
    );
}

#[test]
fn criterion_1_ideal_splitters_induce_cz_at_one_ninth_success() {
    let t0 = Instant::now();
    let gate = build_ppbs_cz(ETA, ETA, ETA, 1.0).unwrap();
    let chi = gate.process().unwrap().chi().unwrap();
    let f = process_fidelity(&chi, &chi_ideal_cz());
    assert!((f - 1.0).abs() < 1e-9, "process fidelity {f}");

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_p = 0.0_f64;
    let mut worst_f = 0.0_f64;
    for _ in 0..20 {
        let ket = random_pure_ket(&mut rng);
        let p = gate.success_probability(&ket).unwrap();
        assert!((p - 1.0 / 9.0).abs() < 1e-9, "success probability {p}");
        worst_p = worst_p.max((p - 1.0 / 9.0).abs());

        let (out, _) = gate.apply_ket(&ket).unwrap();
        let target = TwoQubitState::from_pure(&(cz() * ket)).unwrap();
        let fs = state_fidelity(&out, &target);
        assert!((fs - 1.0).abs() < 1e-9, "output fidelity {fs}");
        worst_f = worst_f.max((fs - 1.0).abs());
    }
    budget(1, t0, 1.0);
    report(
        1,
        "ideal gate is CZ with success 1/9 on 20 random inputs",
        &format!("fidelity err {:.1e}, success err {:.1e}", 1.0 - f, worst_p),
        t0,
    );
}

#[test]
fn criterion_2_ideal_chi_support_and_ml_reconstruction() {
    let t0 = Instant::now();
    let ideal = chi_ideal_cz();
    let support = [0usize, 3, 12, 15]; // II, IZ, ZI, ZZ
    for m in 0..16 {
        for n in 0..16 {
            let mag = ideal.entry(m, n).norm();
            if support.contains(&m) && support.contains(&n) {
                assert!((mag - 0.25).abs() < 1e-12, "chi[{m},{n}] magnitude {mag}");
            } else {
                assert!(mag < 1e-12, "chi[{m},{n}] should vanish, got {mag}");
            }
        }
    }

    let gate = build_ppbs_cz(ETA, ETA, ETA, 1.0).unwrap();
    let process = gate.process().unwrap();
    let preps = preparations_minimal();
    let outputs: Vec<TwoQubitState> = preps.iter().map(|p| process.apply(p).unwrap().0).collect();
    let fit = reconstruct_process(&preps, &outputs).unwrap();
    let err = (fit.chi.matrix() - ideal.matrix()).norm();
    assert!(err < 1e-6, "reconstruction Frobenius error {err}");
    budget(2, t0, 10.0);
    report(
        2,
        "ideal chi lives on II/IZ/ZI/ZZ and the fit reproduces it",
        &format!("Frobenius err {err:.1e}"),
        t0,
    );
}

#[test]
fn criterion_3_local_corrections_rescue_detuned_splitters() {
    let t0 = Instant::now();
    let gate = build_ppbs_cz(0.28, 0.28, 0.29, 1.0).unwrap();
    let process = gate.process().unwrap();
    let outcome = optimize_corrections(&process, &chi_ideal_cz()).unwrap();
    assert!(
        (outcome.fidelity - 0.96).abs() <= 0.01,
        "corrected process fidelity {}",
        outcome.fidelity
    );
    assert!(outcome.fidelity >= outcome.uncorrected_fidelity);
    budget(3, t0, 120.0);
    report(
        3,
        "corrections at eta = (0.28, 0.28, 0.29) reach 0.96 +- 0.01",
        &format!(
            "fidelity {:.4} from {:.4} uncorrected",
            outcome.fidelity, outcome.uncorrected_fidelity
        ),
        t0,
    );
}

#[test]
fn criterion_4_average_fidelity_rescaling_of_published_values() {
    let t0 = Instant::now();
    let a = average_gate_fidelity(0.746).unwrap();
    let b = average_gate_fidelity(0.840).unwrap();
    assert!((a - 0.7968).abs() < 1e-12, "rescaled {a}");
    assert!((b - 0.872).abs() < 1e-12, "rescaled {b}");
    report(
        4,
        "average-fidelity rescaling maps 0.746 -> 0.7968 and 0.840 -> 0.872",
        &format!("{a:.4} and {b:.4}"),
        t0,
    );
}

#[test]
fn criterion_5_bell_truth_table_and_overlap_bisection() {
    let t0 = Instant::now();
    let gate = build_ppbs_cz(ETA, ETA, ETA, 1.0).unwrap();

    let ideal = bell_truth_table(&gate).unwrap();
    for i in 0..4 {
        assert!(
            (ideal.intended(i) - 1.0).abs() < 1e-9,
            "input {i} identified with probability {}",
            ideal.intended(i)
        );
    }
    assert!((ideal.mean_diagonal() - 1.0).abs() < 1e-9);

    let zero = gate.with_overlap(0.0).unwrap();
    let md0 = bell_truth_table(&zero).unwrap().mean_diagonal();
    assert!(md0 <= 0.5 + 1e-12, "mean diagonal at zero overlap {md0}");

    let diagonal_at = |v: f64| -> ppbs_core::Result<f64> {
        Ok(bell_truth_table(&gate.with_overlap(v)?)?.mean_diagonal())
    };
    let v = ppbs_core::opt::bisect(diagonal_at, 0.0, 1.0, 0.78, 1e-6).unwrap();
    let md = diagonal_at(v).unwrap();
    assert!(
        (md - 0.78).abs() <= 0.005,
        "bisection landed at overlap {v} with mean diagonal {md}"
    );
    budget(5, t0, 30.0);
    report(
        5,
        "analyser truth table: exact at V = 1, <= 0.5 at V = 0, bisection hits 0.78",
        &format!("overlap {v:.4} gives mean diagonal {md:.4}"),
        t0,
    );
}

#[test]
fn criterion_6_chi_ii_grows_monotonically_as_overlap_degrades() {
    let t0 = Instant::now();
    let mut prev = f64::INFINITY;
    let mut first = 0.0;
    for k in 0..=10 {
        let v = f64::from(k) / 10.0;
        let chi = build_ppbs_cz(ETA, ETA, ETA, v)
            .unwrap()
            .process()
            .unwrap()
            .chi()
            .unwrap();
        let c = chi.entry(0, 0).re;
        assert!(c <= prev + 1e-12, "chi[II,II] rose from {prev} to {c} at V = {v}");
        if v < 1.0 {
            assert!(c > 0.25, "chi[II,II] = {c} at V = {v}");
        } else {
            assert!((c - 0.25).abs() < 1e-9, "chi[II,II] = {c} at V = 1");
        }
        if k == 0 {
            first = c;
        }
        prev = c;
    }
    budget(6, t0, 60.0);
    report(
        6,
        "chi[II,II] decreases monotonically in V, reaching 0.25 at V = 1",
        &format!("{first:.4} at V = 0 down to {prev:.4} at V = 1"),
        t0,
    );
}

#[test]
fn criterion_7_hom_coincidence_follows_the_overlap_law() {
    let t0 = Instant::now();
    let mut worst = 0.0_f64;
    for k in 0..=10 {
        let overlap = f64::from(k) / 10.0;
        let mut circuit = Circuit::new(2, 2).unwrap();
        circuit.push(Element::bs(0, 1, 0.5).unwrap()).unwrap();
        let transfer = circuit.compile().unwrap();

        let mut terms = Vec::new();
        for (internal, amp) in internal_amplitudes(overlap, PhotonRole::Partner).unwrap() {
            terms.push((
                vec![
                    ModeLabel::new(0, Polarization::H, 0),
                    ModeLabel::new(1, Polarization::H, internal),
                ],
                C64::new(amp, 0.0),
            ));
        }
        let input = PhotonicState::new(terms).unwrap();
        let out = evolve(&input, &transfer).unwrap();
        let coincidence = OccupancyPattern::coincidence(&[0, 1]);
        let p: f64 = out
            .terms()
            .filter(|(occ, _)| coincidence.matches(occ))
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let err = (p - (1.0 - overlap) / 2.0).abs();
        assert!(err < 1e-10, "coincidence {p} at overlap {overlap}");
        worst = worst.max(err);
    }
    report(
        7,
        "two-photon coincidence equals (1 - V) / 2 across the overlap grid",
        &format!("max err {worst:.1e}"),
        t0,
    );
}

#[test]
fn criterion_8_state_tomography_accuracy_and_error_bar_scaling() {
    let t0 = Instant::now();
    let truth = source_state(0.35);
    let settings = settings_overcomplete();

    let mut worst = 1.0_f64;
    for seed in 0..20 {
        let records = simulate_counts(&truth, &settings, 1e5, 1000 + seed).unwrap();
        let fit = reconstruct_state(&records).unwrap();
        let f = state_fidelity(&fit.state, &truth);
        assert!(f > 0.99, "seed {seed} reconstructed with fidelity {f}");
        worst = worst.min(f);
    }

    // Bootstrap error bars on a smooth interior observable, <X x X>, must
    // shrink as 1 / sqrt(counts).
    let xx = {
        let x = nalgebra::Matrix2::new(
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        );
        ppbs_core::qubit::kron_op(&x, &x)
    };
    let mut points = Vec::new();
    for &scale in &[1e3, 1e4, 1e5] {
        let records = simulate_counts(&truth, &settings, scale, 77).unwrap();
        let point = reconstruct_state(&records).unwrap();
        let warm = *point.state.matrix();
        let est = monte_carlo_errors(&records, 24, |resampled| {
            let opts = ReconstructOptions {
                starts: 1,
                warm_start: Some(warm),
                ..Default::default()
            };
            let refit = reconstruct_state_with(resampled, &opts)?;
            Ok(refit.state.expect(&xx).re)
        })
        .unwrap();
        assert!(est.n_success >= 2);
        points.push((scale.ln(), est.std.ln()));
    }
    let xbar = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let slope = points
        .iter()
        .map(|p| (p.0 - xbar) * (p.1 - ybar))
        .sum::<f64>()
        / points.iter().map(|p| (p.0 - xbar).powi(2)).sum::<f64>();
    assert!(
        (slope + 0.5).abs() <= 0.1,
        "bootstrap std scaling exponent {slope}"
    );
    report(
        8,
        "tomography fidelity > 0.99 over 20 seeds; error bars scale as counts^-1/2",
        &format!("min fidelity {worst:.4}, exponent {slope:.3}"),
        t0,
    );
}

#[test]
fn criterion_9_both_constructions_induce_the_same_process() {
    let t0 = Instant::now();
    let mut worst = 0.0_f64;
    for &eta in &[ETA, 0.28] {
        for &overlap in &[1.0, 0.62] {
            let a = build_ppbs_cz(eta, eta, eta, overlap).unwrap().process().unwrap();
            let b = build_interferometric_cz(eta, overlap).unwrap().process().unwrap();
            let d = (a.chi_unnormalized() - b.chi_unnormalized()).norm();
            assert!(d < 1e-9, "chi mismatch {d} at eta = {eta}, V = {overlap}");
            worst = worst.max(d);
        }
    }
    report(
        9,
        "three-splitter and interferometric gates agree at eta = 1/3 and 0.28",
        &format!("max Frobenius diff {worst:.1e}"),
        t0,
    );
}
