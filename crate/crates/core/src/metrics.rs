//! Gate and state quality metrics, plus the local-correction optimizer.
//!
//! Process fidelity compares normalized chi matrices; the average gate
//! fidelity is its affine rescaling. State overlap uses the
//! Uhlmann fidelity, entanglement the Wootters spin-flip construction, and
//! mixedness the normalized linear entropy.
//!
//! [`optimize_corrections`] searches single-qubit unitaries before and
//! after a fixed two-photon process for the ones that best align it with
//! an ideal chi matrix, a diagnostic separating correctable local phase
//! errors from genuine process noise. Post-selection success is invariant
//! under such corrections, so only the fidelity is optimized.

use nalgebra::{DMatrix, Matrix4, Vector2, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use crate::error::{Error, Result};
use crate::gates::{analyze_bell, expected_outcome, BellInput, BellLabel, BellOutcome, GateInstance};
use crate::opt::{nelder_mead, NmOptions};
use crate::process::{ChiMatrix, TwoQubitProcess};
use crate::qubit::{
    c64, euler_unitary, hermitian_eigenvalues, kron_ket, kron_op, pauli_basis, paulis, C64,
    TwoQubitState,
};

/// Overlap of two normalized chi matrices, `Re Tr[a b]`.
///
/// Equals 1 exactly when both describe the same unitary; for a rank-1
/// (unitary) reference it is the usual process fidelity of the other map.
pub fn process_fidelity(a: &ChiMatrix, b: &ChiMatrix) -> f64 {
    (a.matrix() * b.matrix()).trace().re
}

/// Average gate fidelity implied by a two-qubit process fidelity,
/// `(4 f + 1) / 5`.
pub fn average_gate_fidelity(process_fidelity: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&process_fidelity) {
        return Err(Error::ParamRange {
            name: "process_fidelity",
            value: process_fidelity,
            low: 0.0,
            high: 1.0,
        });
    }
    Ok((4.0 * process_fidelity + 1.0) / 5.0)
}

/// Principal square root of a PSD matrix.
///
/// Eigenvalues below noise level are zeroed before the root: the square
/// root amplifies an O(eps) eigenvalue perturbation to O(sqrt(eps)), which
/// would otherwise dominate the error of every fidelity built on top.
fn sqrtm_psd(m: &Matrix4<C64>) -> Matrix4<C64> {
    let (vals, vecs) = crate::linalg::jacobi_hermitian4(m);
    let clip = 1e-14 * vals.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut out = Matrix4::zeros();
    for i in 0..4 {
        if vals[i] > clip {
            let v = vecs.column(i);
            out += (v * v.adjoint()) * c64(vals[i].sqrt(), 0.0);
        }
    }
    out
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2` between two states.
pub fn state_fidelity(a: &TwoQubitState, b: &TwoQubitState) -> f64 {
    let sa = sqrtm_psd(a.matrix());
    let inner = sa * b.matrix() * sa;
    let root_trace = sqrtm_psd(&inner).trace().re;
    (root_trace * root_trace).max(0.0)
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(state: &TwoQubitState) -> f64 {
    let y = paulis()[2];
    let yy = kron_op(&y, &y);
    let rho = state.matrix();
    let rho_tilde = yy * rho.conjugate() * yy;
    // Eigenvalues of rho * rho_tilde via the Hermitian similarity
    // sqrt(rho) rho_tilde sqrt(rho). Noise-level eigenvalues are zeroed
    // for the same reason as in sqrtm_psd.
    let s = sqrtm_psd(rho);
    let m = s * rho_tilde * s;
    let raw = hermitian_eigenvalues(&m);
    let clip = 1e-14 * raw.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut lam: Vec<f64> = raw
        .iter()
        .map(|&e| if e > clip { e.sqrt() } else { 0.0 })
        .collect();
    lam.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    (lam[0] - lam[1] - lam[2] - lam[3]).max(0.0)
}

/// Tangle, the squared concurrence.
pub fn tangle(state: &TwoQubitState) -> f64 {
    let c = concurrence(state);
    c * c
}

/// Normalized linear entropy `(4/3)(1 - Tr[rho^2])`: 0 for pure states,
/// 1 for the maximally mixed state.
pub fn linear_entropy(state: &TwoQubitState) -> f64 {
    (4.0 / 3.0) * (1.0 - state.purity())
}

/// Pairwise Uhlmann fidelities between `n >= 2` states (symmetric, unit
/// diagonal).
pub fn mutual_fidelity_matrix(states: &[TwoQubitState]) -> Result<DMatrix<f64>> {
    if states.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "mutual fidelity needs at least 2 states, got {}",
            states.len()
        )));
    }
    let n = states.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let f = state_fidelity(&states[i], &states[j]);
            m[(i, j)] = f;
            m[(j, i)] = f;
        }
    }
    Ok(m)
}

/// Conditional analyzer statistics for the four rotated Bell inputs.
#[derive(Debug, Clone)]
pub struct TruthTable {
    labels: [BellLabel; 4],
    /// `rows[i][j]` = probability of outcome `BellOutcome::ALL[j]` given
    /// input `labels[i]`; each row sums to 1.
    rows: [[f64; 4]; 4],
    /// Coincidence post-selection probability per input.
    success: [f64; 4],
}

impl TruthTable {
    const ROW_TOL: f64 = 1e-9;

    pub fn new(labels: [BellLabel; 4], rows: [[f64; 4]; 4], success: [f64; 4]) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > Self::ROW_TOL {
                return Err(Error::InvalidMatrix {
                    kind: "truth table",
                    reason: format!("row {i} sums to {sum}, expected 1"),
                });
            }
            if row.iter().any(|&p| !(-Self::ROW_TOL..=1.0 + Self::ROW_TOL).contains(&p)) {
                return Err(Error::InvalidMatrix {
                    kind: "truth table",
                    reason: format!("row {i} has a probability outside [0, 1]"),
                });
            }
        }
        if success
            .iter()
            .any(|&s| !(0.0..=1.0 + Self::ROW_TOL).contains(&s))
        {
            return Err(Error::InvalidMatrix {
                kind: "truth table",
                reason: "success probability outside [0, 1]".into(),
            });
        }
        Ok(Self {
            labels,
            rows,
            success,
        })
    }

    pub fn labels(&self) -> &[BellLabel; 4] {
        &self.labels
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.rows
    }

    pub fn success(&self) -> &[f64; 4] {
        &self.success
    }

    /// Probability of the intended outcome for row `i`.
    pub fn intended(&self, i: usize) -> f64 {
        let want = expected_outcome(self.labels[i]);
        let col = BellOutcome::ALL
            .iter()
            .position(|o| *o == want)
            .expect("outcome in catalog");
        self.rows[i][col]
    }

    /// Mean probability of identifying each input correctly, the headline
    /// analyzer figure of merit.
    pub fn mean_diagonal(&self) -> f64 {
        (0..4).map(|i| self.intended(i)).sum::<f64>() / 4.0
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<6}", "input")?;
        for o in BellOutcome::ALL {
            write!(f, " {o:>7}")?;
        }
        writeln!(f, " {:>9}", "success")?;
        for i in 0..4 {
            write!(f, "{:<6}", self.labels[i].to_string())?;
            for j in 0..4 {
                write!(f, " {:>7.4}", self.rows[i][j])?;
            }
            writeln!(f, " {:>9.5}", self.success[i])?;
        }
        Ok(())
    }
}

/// Send each input through the gate's analyzer and tabulate the outcome
/// probabilities.
pub fn truth_table(gate: &GateInstance, inputs: &[BellInput; 4]) -> Result<TruthTable> {
    let mut labels = [BellLabel::PsiPlus; 4];
    let mut rows = [[0.0; 4]; 4];
    let mut success = [0.0; 4];
    for (i, input) in inputs.iter().enumerate() {
        let state = TwoQubitState::from_pure(&input.ket)?;
        let analysis = analyze_bell(&state, gate)?;
        labels[i] = input.label;
        rows[i] = analysis.probabilities;
        success[i] = analysis.success_probability;
    }
    TruthTable::new(labels, rows, success)
}

/// [`truth_table`] over the standard four rotated Bell inputs.
pub fn bell_truth_table(gate: &GateInstance) -> Result<TruthTable> {
    truth_table(gate, &crate::gates::bell_inputs())
}

// ---------------------------------------------------------------------------
// Local-correction optimization.
// ---------------------------------------------------------------------------

/// Single-qubit unitary corrections applied around a two-qubit process:
/// Euler angles (alpha, beta, gamma) per qubit, before and after.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCorrection {
    pub pre_control: [f64; 3],
    pub pre_target: [f64; 3],
    pub post_control: [f64; 3],
    pub post_target: [f64; 3],
}

impl LocalCorrection {
    pub fn identity() -> Self {
        Self::from_angles(&[0.0; 12])
    }

    /// Unpack from `[pre_control, pre_target, post_control, post_target]`.
    pub fn from_angles(angles: &[f64; 12]) -> Self {
        let take = |k: usize| [angles[k], angles[k + 1], angles[k + 2]];
        Self {
            pre_control: take(0),
            pre_target: take(3),
            post_control: take(6),
            post_target: take(9),
        }
    }

    pub fn angles(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[0..3].copy_from_slice(&self.pre_control);
        out[3..6].copy_from_slice(&self.pre_target);
        out[6..9].copy_from_slice(&self.post_control);
        out[9..12].copy_from_slice(&self.post_target);
        out
    }

    pub fn pre_unitary(&self) -> Matrix4<C64> {
        kron_op(
            &euler_unitary(self.pre_control[0], self.pre_control[1], self.pre_control[2]),
            &euler_unitary(self.pre_target[0], self.pre_target[1], self.pre_target[2]),
        )
    }

    pub fn post_unitary(&self) -> Matrix4<C64> {
        kron_op(
            &euler_unitary(
                self.post_control[0],
                self.post_control[1],
                self.post_control[2],
            ),
            &euler_unitary(self.post_target[0], self.post_target[1], self.post_target[2]),
        )
    }

    /// The corrected process: corrections before and after the gate.
    pub fn apply(&self, process: &TwoQubitProcess) -> TwoQubitProcess {
        process
            .compose_pre_unitary(&self.pre_unitary())
            .compose_post_unitary(&self.post_unitary())
    }
}

/// Result of [`optimize_corrections`].
#[derive(Debug, Clone)]
pub struct CorrectionOutcome {
    pub correction: LocalCorrection,
    /// Process fidelity after the best correction found.
    pub fidelity: f64,
    /// Process fidelity of the uncorrected process.
    pub uncorrected_fidelity: f64,
    /// Total objective evaluations across all restarts.
    pub evaluations: usize,
}

/// Options for the correction search.
#[derive(Debug, Clone)]
pub struct CorrectionOptions {
    /// Simplex restarts; the first always starts at the identity
    /// correction, so the result can never be worse than no correction.
    pub restarts: usize,
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_evals: 3000,
            seed: 777,
        }
    }
}

/// Process fidelity of `correction.apply(process)` against `ideal`,
/// evaluated without rebuilding the corrected process.
pub fn corrected_process_fidelity(
    process: &TwoQubitProcess,
    ideal: &ChiMatrix,
    correction: &LocalCorrection,
) -> Result<f64> {
    Ok(FastFidelity::new(process, ideal)?.eval(&correction.angles()))
}

/// Search local pre/post corrections maximizing process fidelity with
/// `ideal`. Multi-start Nelder-Mead over the 12 Euler angles.
pub fn optimize_corrections(
    process: &TwoQubitProcess,
    ideal: &ChiMatrix,
) -> Result<CorrectionOutcome> {
    optimize_corrections_with(process, ideal, &CorrectionOptions::default())
}

pub fn optimize_corrections_with(
    process: &TwoQubitProcess,
    ideal: &ChiMatrix,
    opts: &CorrectionOptions,
) -> Result<CorrectionOutcome> {
    let fast = FastFidelity::new(process, ideal)?;
    let objective = |x: &[f64]| -fast.eval(x);

    let uncorrected_fidelity = fast.eval(&[0.0; 12]);
    let nm_opts = NmOptions {
        max_evals: opts.max_evals,
        f_tol: 1e-12,
        step: 0.4,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut evaluations = 0usize;
    let mut best_x = vec![0.0; 12];
    let mut best_f = f64::MAX;
    for r in 0..opts.restarts.max(1) {
        let start: Vec<f64> = if r == 0 {
            vec![0.0; 12]
        } else {
            (0..12).map(|_| rng.gen_range(-PI..PI)).collect()
        };
        let outcome = nelder_mead(objective, &start, &nm_opts);
        evaluations += outcome.evals;
        if outcome.f < best_f {
            best_f = outcome.f;
            best_x = outcome.x;
        }
    }
    // Polish the winner with a tight simplex.
    let polish = nelder_mead(
        objective,
        &best_x,
        &NmOptions {
            max_evals: 1000,
            f_tol: 1e-14,
            step: 0.05,
        },
    );
    evaluations += polish.evals;
    if polish.f < best_f {
        best_f = polish.f;
        best_x = polish.x;
    }

    let angles: [f64; 12] = best_x.as_slice().try_into().expect("12 angles");
    Ok(CorrectionOutcome {
        correction: LocalCorrection::from_angles(&angles),
        fidelity: -best_f,
        uncorrected_fidelity,
        evaluations,
    })
}

/// Precomputed data for evaluating corrected process fidelity cheaply.
///
/// With `chi_ideal = sum_k lambda_k v_k v_k^H` and `M_k = sum_m v_k[m] P_m`,
/// the fidelity of the corrected process reduces to
/// `sum_k lambda_k sum_cd a_c^H E[c][d] a_d / (4 t0)` where `a_c` are the
/// columns of `A_k = U_post^H M_k U_pre^H`, `E[c][d]` are the uncorrected
/// process blocks, and `t0` is the (correction-invariant) trace sum. This
/// avoids rebuilding blocks and chi on every optimizer step; the agreement
/// with the direct evaluation is pinned by a test.
struct FastFidelity {
    blocks: [[Matrix4<C64>; 4]; 4],
    terms: Vec<(f64, Matrix4<C64>)>,
    t0: f64,
}

impl FastFidelity {
    fn new(process: &TwoQubitProcess, ideal: &ChiMatrix) -> Result<Self> {
        let t0 = process.mean_success_probability() * 4.0;
        if t0 < 1e-14 {
            return Err(Error::NullPostSelection);
        }
        let herm = (ideal.matrix() + ideal.matrix().adjoint()) * c64(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(herm);
        let basis = pauli_basis();
        let mut terms = Vec::new();
        for k in 0..16 {
            let lam = eig.eigenvalues[k];
            if lam > 1e-12 {
                let mut m = Matrix4::<C64>::zeros();
                for p in 0..16 {
                    m += basis[p] * eig.eigenvectors[(p, k)];
                }
                terms.push((lam, m));
            }
        }
        let blocks = std::array::from_fn(|a| std::array::from_fn(|b| *process.block(a, b)));
        Ok(Self { blocks, terms, t0 })
    }

    fn eval(&self, angles: &[f64]) -> f64 {
        let correction =
            LocalCorrection::from_angles(angles.try_into().expect("12 correction angles"));
        let pre_h = correction.pre_unitary().adjoint();
        let post_h = correction.post_unitary().adjoint();
        let mut total = 0.0;
        for (lam, m) in &self.terms {
            let a = post_h * m * pre_h;
            let cols: [Vector4<C64>; 4] = std::array::from_fn(|c| a.column(c).into_owned());
            let mut acc = c64(0.0, 0.0);
            for c in 0..4 {
                for d in 0..4 {
                    acc += cols[c].dotc(&(self.blocks[c][d] * cols[d]));
                }
            }
            total += lam * acc.re;
        }
        total / (4.0 * self.t0)
    }
}

// ---------------------------------------------------------------------------
// Separable-phase model fit.
// ---------------------------------------------------------------------------

/// Best-fit shared phases for the separable model of analyzer outputs.
#[derive(Debug, Clone)]
pub struct SeparablePhaseFit {
    pub phi_control: f64,
    pub phi_target: f64,
    /// Mean fidelity of the four outputs to the fitted model states.
    pub mean_fidelity: f64,
}

/// Fixed per-row sign pattern (control, target) of the separable model, in
/// input order psi'+, psi'-, phi'+, phi'-.
const MODEL_SIGNS: [(f64, f64); 4] = [(-1.0, 1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];

fn phase_ket(sigma: f64, phi: f64) -> Vector2<C64> {
    // (|H> + sigma e^{i phi} |V>) / sqrt(2) in logical (V, H) component order.
    Vector2::new(
        C64::from_polar(FRAC_1_SQRT_2 * sigma, phi),
        c64(FRAC_1_SQRT_2, 0.0),
    )
}

fn wrap_angle(t: f64) -> f64 {
    t.sin().atan2(t.cos())
}

/// Fit shared phases (phi_control, phi_target) so that the four analyzer
/// output states are closest to products of diagonal-basis states with the
/// fixed sign pattern of the ideal gate. A high mean fidelity certifies the
/// outputs as separable up to common local phases.
///
/// `outputs` must be the post-gate states for the rotated Bell inputs in
/// [`BellLabel::ALL`] order.
pub fn fit_separable_phases(outputs: &[TwoQubitState; 4]) -> SeparablePhaseFit {
    let mean_fidelity = |phis: &[f64]| -> f64 {
        let mut acc = 0.0;
        for (row, (s1, s2)) in MODEL_SIGNS.iter().enumerate() {
            let ket = kron_ket(&phase_ket(*s1, phis[0]), &phase_ket(*s2, phis[1]));
            let proj = ket * ket.adjoint();
            acc += outputs[row].expect(&proj).re;
        }
        acc / 4.0
    };
    let objective = |phis: &[f64]| -mean_fidelity(phis);

    let coarse = NmOptions {
        max_evals: 400,
        f_tol: 1e-14,
        step: 0.3,
    };
    let mut best_x = vec![0.0, 0.0];
    let mut best_f = f64::MAX;
    for i in 0..4 {
        for j in 0..4 {
            let start = vec![
                -0.75 * PI + 0.5 * PI * i as f64,
                -0.75 * PI + 0.5 * PI * j as f64,
            ];
            let outcome = nelder_mead(objective, &start, &coarse);
            if outcome.f < best_f {
                best_f = outcome.f;
                best_x = outcome.x;
            }
        }
    }
    let polish = nelder_mead(
        objective,
        &best_x,
        &NmOptions {
            max_evals: 600,
            f_tol: 1e-16,
            step: 0.02,
        },
    );
    if polish.f < best_f {
        best_f = polish.f;
        best_x = polish.x;
    }
    SeparablePhaseFit {
        phi_control: wrap_angle(best_x[0]),
        phi_target: wrap_angle(best_x[1]),
        mean_fidelity: -best_f,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{bell_inputs, build_ppbs_cz};
    use crate::process::{chi_from_unitary, chi_ideal_cz};
    use crate::qubit::{ket_d, ket_h, ket_v, random_pure_ket};
    use approx::assert_abs_diff_eq;

    fn ideal_gate() -> crate::gates::GateInstance {
        build_ppbs_cz(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0).unwrap()
    }

    fn phi_plus() -> TwoQubitState {
        let ket = (kron_ket(&ket_h(), &ket_h()) + kron_ket(&ket_v(), &ket_v()))
            * c64(FRAC_1_SQRT_2, 0.0);
        TwoQubitState::from_pure(&ket).unwrap()
    }

    fn werner_half() -> TwoQubitState {
        let pure = phi_plus();
        let mixed = TwoQubitState::maximally_mixed();
        TwoQubitState::new(pure.matrix() * c64(0.5, 0.0) + mixed.matrix() * c64(0.5, 0.0)).unwrap()
    }

    fn random_local(rng: &mut ChaCha8Rng) -> Matrix4<C64> {
        let mut angle = || rng.gen_range(-PI..PI);
        kron_op(
            &euler_unitary(angle(), angle(), angle()),
            &euler_unitary(angle(), angle(), angle()),
        )
    }

    #[test]
    fn identity_against_cz_scores_one_quarter() {
        let ident = chi_from_unitary(&Matrix4::identity()).unwrap();
        let f = process_fidelity(&ident, &chi_ideal_cz());
        assert_abs_diff_eq!(f, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(
            process_fidelity(&chi_ideal_cz(), &chi_ideal_cz()),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn average_fidelity_rescaling_matches_frozen_pairs() {
        assert_abs_diff_eq!(average_gate_fidelity(0.746).unwrap(), 0.7968, epsilon = 1e-12);
        assert_abs_diff_eq!(average_gate_fidelity(0.840).unwrap(), 0.872, epsilon = 1e-12);
        assert_abs_diff_eq!(average_gate_fidelity(1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(average_gate_fidelity(0.0).unwrap(), 0.2, epsilon = 1e-12);
        assert!(average_gate_fidelity(-0.1).is_err());
        assert!(average_gate_fidelity(1.1).is_err());
    }

    #[test]
    fn werner_state_metrics_match_closed_forms() {
        let w = werner_half();
        assert_abs_diff_eq!(state_fidelity(&w, &phi_plus()), 0.625, epsilon = 1e-10);
        assert_abs_diff_eq!(tangle(&w), 0.0625, epsilon = 1e-10);
        assert_abs_diff_eq!(w.purity(), 0.4375, epsilon = 1e-12);
        assert_abs_diff_eq!(linear_entropy(&w), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_reduces_for_pure_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = TwoQubitState::from_pure(&random_pure_ket(&mut rng)).unwrap();
            let u = random_local(&mut rng);
            let b = TwoQubitState::new(
                a.matrix() * c64(0.6, 0.0)
                    + (u * TwoQubitState::maximally_mixed().matrix() * u.adjoint())
                        * c64(0.4, 0.0),
            )
            .unwrap();
            assert_abs_diff_eq!(state_fidelity(&a, &b), state_fidelity(&b, &a), epsilon = 1e-10);
            // Pure reference: fidelity reduces to the expectation value.
            let direct = b.expect(a.matrix()).re;
            assert_abs_diff_eq!(state_fidelity(&a, &b), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn tangle_and_entropy_are_local_unitary_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let pure = TwoQubitState::from_pure(&random_pure_ket(&mut rng)).unwrap();
            let state = TwoQubitState::new(
                pure.matrix() * c64(0.8, 0.0)
                    + TwoQubitState::maximally_mixed().matrix() * c64(0.2, 0.0),
            )
            .unwrap();
            let u = random_local(&mut rng);
            let rotated = state.conjugate(&u).unwrap();
            assert_abs_diff_eq!(tangle(&state), tangle(&rotated), epsilon = 1e-10);
            assert_abs_diff_eq!(
                linear_entropy(&state),
                linear_entropy(&rotated),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn entropy_and_tangle_endpoints() {
        let pure = phi_plus();
        assert_abs_diff_eq!(linear_entropy(&pure), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tangle(&pure), 1.0, epsilon = 1e-10);
        let mixed = TwoQubitState::maximally_mixed();
        assert_abs_diff_eq!(linear_entropy(&mixed), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tangle(&mixed), 0.0, epsilon = 1e-12);
        // Product state: entangled in no sense.
        let product = TwoQubitState::from_pure(&kron_ket(&ket_d(), &ket_h())).unwrap();
        assert_abs_diff_eq!(tangle(&product), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ideal_truth_table_is_an_exact_permutation() {
        let table = bell_truth_table(&ideal_gate()).unwrap();
        assert_abs_diff_eq!(table.mean_diagonal(), 1.0, epsilon = 1e-10);
        for i in 0..4 {
            assert_abs_diff_eq!(table.intended(i), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(table.success()[i], 1.0 / 9.0, epsilon = 1e-10);
        }
        let shown = table.to_string();
        assert!(shown.contains("psi+"));
    }

    #[test]
    fn truth_table_validation_rejects_bad_rows() {
        let labels = [
            BellLabel::PsiPlus,
            BellLabel::PsiMinus,
            BellLabel::PhiPlus,
            BellLabel::PhiMinus,
        ];
        let uniform = [[0.25; 4]; 4];
        let table = TruthTable::new(labels, uniform, [0.1; 4]).unwrap();
        assert_abs_diff_eq!(table.mean_diagonal(), 0.25, epsilon = 1e-12);

        let bad = [[0.3, 0.3, 0.3, 0.3], [0.25; 4], [0.25; 4], [0.25; 4]];
        assert!(TruthTable::new(labels, bad, [0.1; 4]).is_err());
        let negative = [[-0.5, 0.5, 0.5, 0.5], [0.25; 4], [0.25; 4], [0.25; 4]];
        assert!(TruthTable::new(labels, negative, [0.1; 4]).is_err());
        assert!(TruthTable::new(labels, uniform, [1.5; 4]).is_err());
    }

    #[test]
    fn mutual_fidelity_of_analyzer_outputs_tracks_distinguishability() {
        let gate = ideal_gate();
        let process = gate.process().unwrap();
        let outputs: Vec<TwoQubitState> = bell_inputs()
            .iter()
            .map(|input| {
                let state = TwoQubitState::from_pure(&input.ket).unwrap();
                process.apply(&state).unwrap().0
            })
            .collect();
        let m = mutual_fidelity_matrix(&outputs).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(m[(i, i)], 1.0, epsilon = 1e-12);
            for j in 0..4 {
                if i != j {
                    assert!(m[(i, j)] < 1e-9, "ideal outputs should be orthogonal");
                }
            }
        }

        let copies = vec![phi_plus(); 3];
        let m = mutual_fidelity_matrix(&copies).unwrap();
        assert!(m.iter().all(|&f| (f - 1.0).abs() < 1e-10));

        // Imperfect interference leaves residual overlap between outcomes.
        let blurred_gate = gate.with_overlap(0.8).unwrap();
        let blurred_process = blurred_gate.process().unwrap();
        let blurred: Vec<TwoQubitState> = bell_inputs()
            .iter()
            .map(|input| {
                let state = TwoQubitState::from_pure(&input.ket).unwrap();
                blurred_process.apply(&state).unwrap().0
            })
            .collect();
        let mb = mutual_fidelity_matrix(&blurred).unwrap();
        let mut off = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    off += mb[(i, j)] / 12.0;
                }
            }
        }
        assert!(off > 0.01 && off < 1.0, "mean off-diagonal {off}");

        assert!(mutual_fidelity_matrix(&outputs[..1]).is_err());
    }

    #[test]
    fn fast_correction_objective_matches_direct_evaluation() {
        let gate = build_ppbs_cz(0.30, 0.35, 0.28, 0.9).unwrap();
        let process = gate.process().unwrap();
        let ideal = chi_ideal_cz();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let mut angles = [0.0; 12];
            for a in &mut angles {
                *a = rng.gen_range(-PI..PI);
            }
            let correction = LocalCorrection::from_angles(&angles);
            let fast = corrected_process_fidelity(&process, &ideal, &correction).unwrap();
            let slow = process_fidelity(&correction.apply(&process).chi().unwrap(), &ideal);
            assert_abs_diff_eq!(fast, slow, epsilon = 1e-10);
        }
        // Identity correction reproduces the plain process fidelity.
        let plain = process_fidelity(&process.chi().unwrap(), &ideal);
        let at_zero =
            corrected_process_fidelity(&process, &ideal, &LocalCorrection::identity()).unwrap();
        assert_abs_diff_eq!(plain, at_zero, epsilon = 1e-12);
    }

    #[test]
    fn optimization_never_hurts_and_hits_the_known_optimum() {
        let gate = build_ppbs_cz(0.28, 0.28, 0.29, 1.0).unwrap();
        let process = gate.process().unwrap();
        let out = optimize_corrections(&process, &chi_ideal_cz()).unwrap();
        assert!(out.fidelity >= out.uncorrected_fidelity - 1e-12);
        assert!(
            (out.fidelity - 0.96).abs() < 0.01,
            "optimized fidelity {}",
            out.fidelity
        );
        assert!(out.evaluations > 0);

        // Success probability is invariant under the corrections.
        let corrected = out.correction.apply(&process);
        assert_abs_diff_eq!(
            corrected.mean_success_probability(),
            process.mean_success_probability(),
            epsilon = 1e-12
        );

        // Re-optimizing the corrected process cannot improve beyond
        // numerical slack.
        let again = optimize_corrections(&corrected, &chi_ideal_cz()).unwrap();
        assert!(again.fidelity <= out.fidelity + 1e-6);
    }

    #[test]
    fn planted_local_errors_are_fully_corrected() {
        let process = ideal_gate().process().unwrap();
        let plant = LocalCorrection::from_angles(&[
            0.3, -0.4, 0.9, -1.2, 0.5, 0.2, 0.7, -0.3, 1.1, -0.8, 0.25, 0.6,
        ]);
        let corrupted = plant.apply(&process);
        let before = process_fidelity(&corrupted.chi().unwrap(), &chi_ideal_cz());
        assert!(before < 0.99, "plant should visibly corrupt: {before}");
        let out = optimize_corrections(&corrupted, &chi_ideal_cz()).unwrap();
        assert!(out.fidelity > 1.0 - 1e-4, "recovered fidelity {}", out.fidelity);
    }

    #[test]
    fn ideal_process_gains_nothing_from_correction() {
        let process = ideal_gate().process().unwrap();
        let out = optimize_corrections_with(
            &process,
            &chi_ideal_cz(),
            &CorrectionOptions {
                restarts: 4,
                max_evals: 1500,
                seed: 9,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(out.uncorrected_fidelity, 1.0, epsilon = 1e-9);
        assert!(out.fidelity <= 1.0 + 1e-9);
        assert!(out.fidelity - out.uncorrected_fidelity < 1e-9);
    }

    #[test]
    fn separable_phase_fit_recovers_planted_phases() {
        let planted = (0.4, -0.7);
        let outputs: [TwoQubitState; 4] = std::array::from_fn(|row| {
            let (s1, s2) = MODEL_SIGNS[row];
            let ket = kron_ket(&phase_ket(s1, planted.0), &phase_ket(s2, planted.1));
            TwoQubitState::from_pure(&ket).unwrap()
        });
        let fit = fit_separable_phases(&outputs);
        assert_abs_diff_eq!(fit.phi_control, planted.0, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.phi_target, planted.1, epsilon = 1e-6);
        assert!(fit.mean_fidelity > 1.0 - 1e-10);
    }

    #[test]
    fn ideal_gate_outputs_fit_the_separable_model_at_zero_phase() {
        let process = ideal_gate().process().unwrap();
        let outputs: [TwoQubitState; 4] = std::array::from_fn(|i| {
            let input = &bell_inputs()[i];
            let state = TwoQubitState::from_pure(&input.ket).unwrap();
            process.apply(&state).unwrap().0
        });
        let fit = fit_separable_phases(&outputs);
        assert!(fit.mean_fidelity > 1.0 - 1e-9, "fidelity {}", fit.mean_fidelity);
        assert_abs_diff_eq!(fit.phi_control, 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(fit.phi_target, 0.0, epsilon = 1e-5);
    }
}
