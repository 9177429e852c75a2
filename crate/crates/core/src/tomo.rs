//! Simulated tomographic counts and maximum-likelihood reconstruction.
//!
//! Counts are Poisson draws around `total_scale * Tr[rho Pi]` per setting,
//! reproducible from an explicit seed. State reconstruction maximizes the
//! Poisson likelihood over the Cholesky-parameterized physical set
//! `rho = T^dagger T / Tr[T^dagger T]` with an upper-triangular `T`, so
//! every estimate is Hermitian, positive semidefinite, and unit trace by
//! construction. Process reconstruction fits a chi matrix, parameterized
//! the same way (`chi proportional to T^dagger T`), to the normalized
//! output states of a spanning set of preparations; complete positivity is
//! again structural rather than enforced by penalties.
//!
//! Error bars come from a parametric bootstrap: counts are re-drawn Poisson
//! around the observed counts and the estimator is re-run per resample,
//! seeded deterministically from the records themselves.

use nalgebra::{DMatrix, DVector, Matrix4, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::fmt;

use crate::error::{Error, Result};
use crate::opt::{bfgs, BfgsOptions};
use crate::process::{Chi16, ChiMatrix};
use crate::qubit::{
    c64, ket_a, ket_d, ket_h, ket_l, ket_r, ket_v, kron_ket, pauli_basis, C64, TwoQubitState,
};

/// Single-qubit analyzer states available to the tomography stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolBasis {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl PolBasis {
    pub const ALL: [PolBasis; 6] = [
        PolBasis::H,
        PolBasis::V,
        PolBasis::D,
        PolBasis::A,
        PolBasis::R,
        PolBasis::L,
    ];

    /// The analyzer ket in logical component order.
    pub fn ket(self) -> Vector2<C64> {
        match self {
            PolBasis::H => ket_h(),
            PolBasis::V => ket_v(),
            PolBasis::D => ket_d(),
            PolBasis::A => ket_a(),
            PolBasis::R => ket_r(),
            PolBasis::L => ket_l(),
        }
    }

    pub fn label(self) -> char {
        match self {
            PolBasis::H => 'H',
            PolBasis::V => 'V',
            PolBasis::D => 'D',
            PolBasis::A => 'A',
            PolBasis::R => 'R',
            PolBasis::L => 'L',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.label() == c)
    }
}

impl fmt::Display for PolBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// One coincidence measurement setting: an analyzer state per qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasurementSetting {
    pub control: PolBasis,
    pub target: PolBasis,
}

impl MeasurementSetting {
    pub fn new(control: PolBasis, target: PolBasis) -> Self {
        Self { control, target }
    }

    /// Rank-1 projector onto the analyzer product state.
    pub fn projector(&self) -> Matrix4<C64> {
        let ket = kron_ket(&self.control.ket(), &self.target.ket());
        ket * ket.adjoint()
    }

    /// Detection probability for `state` at this setting.
    pub fn probability(&self, state: &TwoQubitState) -> f64 {
        state.expect(&self.projector()).re.clamp(0.0, 1.0)
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.control.label(), self.target.label())
    }
}

/// The 36-setting over-complete set: all pairs from {H, V, D, A, R, L}.
pub fn settings_overcomplete() -> Vec<MeasurementSetting> {
    let mut out = Vec::with_capacity(36);
    for c in PolBasis::ALL {
        for t in PolBasis::ALL {
            out.push(MeasurementSetting::new(c, t));
        }
    }
    out
}

/// The 16-setting minimal complete set: all pairs from {H, V, D, R}.
pub fn settings_minimal() -> Vec<MeasurementSetting> {
    let four = [PolBasis::H, PolBasis::V, PolBasis::D, PolBasis::R];
    let mut out = Vec::with_capacity(16);
    for c in four {
        for t in four {
            out.push(MeasurementSetting::new(c, t));
        }
    }
    out
}

/// One simulated coincidence count at one setting.
#[derive(Debug, Clone)]
pub struct CountRecord {
    pub setting: MeasurementSetting,
    pub count: u64,
    /// Expected counts for a unit-probability setting.
    pub total_scale: f64,
    /// Seed of the run that produced this record.
    pub rng_seed: u64,
}

/// Draw Poisson counts for every setting, mean `total_scale * Tr[rho Pi]`.
///
/// Deterministic for a fixed seed: settings are drawn in order from a
/// counter-based stream, so the result is independent of any parallelism in
/// the caller.
pub fn simulate_counts(
    state: &TwoQubitState,
    settings: &[MeasurementSetting],
    total_scale: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    if !(total_scale > 0.0) || !total_scale.is_finite() {
        return Err(Error::ParamRange {
            name: "total_scale",
            value: total_scale,
            low: f64::MIN_POSITIVE,
            high: f64::INFINITY,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(settings.len());
    for setting in settings {
        let mean = total_scale * setting.probability(state);
        let count = draw_poisson(&mut rng, mean);
        records.push(CountRecord {
            setting: *setting,
            count,
            total_scale,
            rng_seed: seed,
        });
    }
    Ok(records)
}

fn draw_poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive mean");
    dist.sample(rng) as u64
}

/// Exact detection probabilities, the noiseless stand-in for counts.
pub fn exact_probabilities(state: &TwoQubitState, settings: &[MeasurementSetting]) -> Vec<f64> {
    settings.iter().map(|s| s.probability(state)).collect()
}

/// Options for the maximum-likelihood state fit.
#[derive(Debug, Clone)]
pub struct ReconstructOptions {
    /// Number of optimizer starts (first two are deterministic).
    pub starts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Seed for the randomized starts.
    pub seed: u64,
    /// Start from this density matrix instead of the default start set
    /// (used to warm-start bootstrap refits).
    pub warm_start: Option<Matrix4<C64>>,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            max_iter: 2000,
            grad_tol: 1e-8,
            seed: 2026,
            warm_start: None,
        }
    }
}

/// A maximum-likelihood state estimate with fit diagnostics.
#[derive(Debug, Clone)]
pub struct StateReconstruction {
    pub state: TwoQubitState,
    /// Final normalized negative log-likelihood.
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// True when the gradient tolerance was reached (iteration-cap or
    /// line-search stalls leave this false as a warning flag).
    pub converged: bool,
    /// Objective after each accepted iteration of the winning start
    /// (non-increasing, i.e. likelihood non-decreasing).
    pub history: Vec<f64>,
}

/// Maximum-likelihood state reconstruction with default options.
pub fn reconstruct_state(records: &[CountRecord]) -> Result<StateReconstruction> {
    reconstruct_state_with(records, &ReconstructOptions::default())
}

/// Maximum-likelihood state reconstruction from Poisson count records.
pub fn reconstruct_state_with(
    records: &[CountRecord],
    opts: &ReconstructOptions,
) -> Result<StateReconstruction> {
    if records.iter().all(|r| r.count == 0) {
        return Err(Error::DegenerateData("all counts are zero".into()));
    }
    let projectors: Vec<Matrix4<C64>> = records.iter().map(|r| r.setting.projector()).collect();
    let counts: Vec<f64> = records.iter().map(|r| r.count as f64).collect();
    let scales: Vec<f64> = records.iter().map(|r| r.total_scale).collect();
    ml_fit_state(&projectors, &counts, &scales, opts)
}

/// Noiseless reconstruction from exact probabilities (unit scale per
/// setting); the maximum-likelihood fixed point is the true state.
pub fn reconstruct_state_from_probabilities(
    settings: &[MeasurementSetting],
    probabilities: &[f64],
    opts: &ReconstructOptions,
) -> Result<StateReconstruction> {
    if settings.len() != probabilities.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} settings vs {} probabilities",
            settings.len(),
            probabilities.len()
        )));
    }
    if probabilities.iter().all(|&p| p <= 0.0) {
        return Err(Error::DegenerateData("all probabilities are zero".into()));
    }
    let projectors: Vec<Matrix4<C64>> = settings.iter().map(|s| s.projector()).collect();
    let scales = vec![1.0; settings.len()];
    ml_fit_state(&projectors, probabilities, &scales, opts)
}

// ---------------------------------------------------------------------------
// Triangular parameterizations shared by the state and process fits.
// ---------------------------------------------------------------------------

/// Number of real parameters of an upper-triangular complex n x n matrix
/// with a real diagonal.
fn tri_param_count(n: usize) -> usize {
    n * n
}

/// Build the upper-triangular `T` from packed parameters: first the `n`
/// real diagonal entries, then (re, im) pairs row-major over `i < j`.
fn params_to_upper(theta: &[f64], n: usize) -> DMatrix<C64> {
    let mut t = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = c64(theta[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            t[(i, j)] = c64(theta[k], theta[k + 1]);
            k += 2;
        }
    }
    t
}

/// Inverse of [`params_to_upper`] (imaginary parts of the diagonal drop).
fn upper_to_params(t: &DMatrix<C64>) -> Vec<f64> {
    let n = t.nrows();
    let mut theta = vec![0.0; tri_param_count(n)];
    for i in 0..n {
        theta[i] = t[(i, i)].re;
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            theta[k] = t[(i, j)].re;
            theta[k + 1] = t[(i, j)].im;
            k += 2;
        }
    }
    theta
}

/// Upper-triangular factor of a PSD matrix, nudged to positive definite.
fn upper_factor_of(rho: &DMatrix<C64>) -> DMatrix<C64> {
    let n = rho.nrows();
    let eps = 1e-6 * rho.trace().re.abs().max(1e-12);
    let padded = rho + DMatrix::<C64>::identity(n, n) * c64(eps, 0.0);
    match padded.clone().cholesky() {
        // cholesky gives lower L with M = L L^H; T = L^H is upper and
        // satisfies T^H T = M.
        Some(ch) => ch.l().adjoint(),
        None => DMatrix::<C64>::identity(n, n) * c64((rho.trace().re / n as f64).sqrt(), 0.0),
    }
}

/// Gradient of `2 Re Tr[dT X-form]` packed like the parameters: the caller
/// supplies `X` with `d(objective) = coeff * Re X[j, i]` per real param and
/// `-coeff * Im X[j, i]` per imaginary param, plus a diagonal-sourced term.
fn pack_gradient(
    n: usize,
    coeff: f64,
    x: &DMatrix<C64>,
    diag_coeff: f64,
    t: &DMatrix<C64>,
) -> Vec<f64> {
    let mut grad = vec![0.0; tri_param_count(n)];
    for i in 0..n {
        grad[i] = coeff * x[(i, i)].re + diag_coeff * 2.0 * t[(i, i)].re;
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            grad[k] = coeff * x[(j, i)].re + diag_coeff * 2.0 * t[(i, j)].re;
            grad[k + 1] = -coeff * x[(j, i)].im + diag_coeff * 2.0 * t[(i, j)].im;
            k += 2;
        }
    }
    grad
}

// ---------------------------------------------------------------------------
// State fit internals.
// ---------------------------------------------------------------------------

const P_FLOOR: f64 = 1e-12;

struct StateProblem {
    projectors: Vec<Matrix4<C64>>,
    counts: Vec<f64>,
    scales: Vec<f64>,
    norm: f64,
}

impl StateProblem {
    fn rho_un(&self, theta: &[f64]) -> Matrix4<C64> {
        let t = params_to_upper(theta, 4);
        let rho = t.adjoint() * &t;
        Matrix4::from_fn(|i, j| rho[(i, j)])
    }

    /// Normalized negative log-likelihood (dropping count-only constants).
    fn objective(&self, theta: &[f64]) -> f64 {
        let rho_un = self.rho_un(theta);
        let s = rho_un.trace().re;
        if s <= 0.0 {
            return f64::MAX;
        }
        let mut f = 0.0;
        for k in 0..self.projectors.len() {
            let p = ((rho_un * self.projectors[k]).trace().re / s).max(0.0);
            let lambda = self.scales[k] * p;
            f += lambda;
            if self.counts[k] > 0.0 {
                f -= self.counts[k] * (self.scales[k] * p.max(P_FLOOR)).ln();
            }
        }
        f / self.norm
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let t = params_to_upper(theta, 4);
        let rho_un_d = t.adjoint() * &t;
        let rho_un = Matrix4::from_fn(|i, j| rho_un_d[(i, j)]);
        let s = rho_un.trace().re;
        if s <= 0.0 {
            return vec![0.0; tri_param_count(4)];
        }
        // Omega = (1/s) sum_k c_k (Pi_k - p_k I), c_k = (s_k - n_k/p_k)/norm.
        let mut omega = Matrix4::<C64>::zeros();
        for k in 0..self.projectors.len() {
            let p = ((rho_un * self.projectors[k]).trace().re / s).max(P_FLOOR);
            let c = (self.scales[k] - self.counts[k] / p) / self.norm;
            omega += (self.projectors[k] - Matrix4::identity() * c64(p, 0.0)) * c64(c / s, 0.0);
        }
        // d f = Tr[d(rho_un) Omega] = 2 Re Tr[dT (Omega T^H)].
        let omega_d = DMatrix::<C64>::from_fn(4, 4, |i, j| omega[(i, j)]);
        let x = omega_d * t.adjoint();
        pack_gradient(4, 2.0, &x, 0.0, &t)
    }
}

fn ml_fit_state(
    projectors: &[Matrix4<C64>],
    counts: &[f64],
    scales: &[f64],
    opts: &ReconstructOptions,
) -> Result<StateReconstruction> {
    let rank = projector_rank(projectors);
    if rank < 16 {
        return Err(Error::RankDeficient { rank, needed: 16 });
    }
    let norm: f64 = scales.iter().sum();
    let problem = StateProblem {
        projectors: projectors.to_vec(),
        counts: counts.to_vec(),
        scales: scales.to_vec(),
        norm,
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(warm) = &opts.warm_start {
        let warm_d = DMatrix::<C64>::from_fn(4, 4, |i, j| warm[(i, j)]);
        starts.push(upper_to_params(&upper_factor_of(&warm_d)));
    }
    // Linear-inversion start: least-squares Hermitian fit, PSD-projected.
    starts.push(upper_to_params(&upper_factor_of(&linear_inversion(
        projectors, counts, scales,
    ))));
    // Maximally mixed start.
    starts.push(upper_to_params(
        &(DMatrix::<C64>::identity(4, 4) * c64(0.5, 0.0)),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < opts.starts.max(1) {
        let theta: Vec<f64> = (0..tri_param_count(4))
            .map(|_| 0.5 * crate::qubit::standard_normal(&mut rng))
            .collect();
        starts.push(theta);
    }
    starts.truncate(opts.starts.max(1));

    let bfgs_opts = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
    };
    let mut best: Option<crate::opt::BfgsOutcome> = None;
    for start in &starts {
        let outcome = bfgs(
            |x| problem.objective(x),
            |x| problem.gradient(x),
            start,
            &bfgs_opts,
        );
        if best.as_ref().is_none_or(|b| outcome.f < b.f) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one start");

    let rho_un = problem.rho_un(&best.x);
    let s = rho_un.trace().re;
    if s <= 0.0 {
        return Err(Error::SolverFailure("fit collapsed to zero trace".into()));
    }
    let state = TwoQubitState::new(rho_un / c64(s, 0.0))?;
    Ok(StateReconstruction {
        state,
        objective: best.f,
        grad_norm: best.grad_norm,
        iterations: best.iterations,
        converged: best.converged,
        history: best.history,
    })
}

/// Rank of the projector set over the 16-dimensional operator space.
fn projector_rank(projectors: &[Matrix4<C64>]) -> usize {
    if projectors.is_empty() {
        return 0;
    }
    let m = DMatrix::<C64>::from_fn(projectors.len(), 16, |k, c| projectors[k][(c / 4, c % 4)]);
    let svd = m.svd(false, false);
    let max = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    if max == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|&&v| v > 1e-9 * max)
        .count()
}

/// Least-squares Hermitian estimate from raw frequencies, clipped to the
/// physical set. Only used to seed the maximum-likelihood fit.
fn linear_inversion(
    projectors: &[Matrix4<C64>],
    counts: &[f64],
    scales: &[f64],
) -> DMatrix<C64> {
    let paulis = pauli_basis();
    let k = projectors.len();
    let a = DMatrix::<f64>::from_fn(k, 16, |r, m| (projectors[r] * paulis[m]).trace().re);
    let y = DVector::<f64>::from_fn(k, |r, _| counts[r] / scales[r].max(1e-30));
    let x = (a.transpose() * &a)
        .lu()
        .solve(&(a.transpose() * y))
        .unwrap_or_else(|| DVector::zeros(16));
    let mut rho = Matrix4::<C64>::zeros();
    for m in 0..16 {
        rho += paulis[m] * c64(x[m], 0.0);
    }
    // Clip to PSD and renormalize to unit trace.
    let herm = (rho + rho.adjoint()) * c64(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let mut clipped = Matrix4::<C64>::zeros();
    for i in 0..4 {
        let lam = eig.eigenvalues[i].max(0.0);
        let v = eig.eigenvectors.column(i);
        clipped += (v * v.adjoint()) * c64(lam, 0.0);
    }
    let tr = clipped.trace().re;
    let normalized = if tr > 1e-12 {
        clipped / c64(tr, 0.0)
    } else {
        Matrix4::identity() * c64(0.25, 0.0)
    };
    DMatrix::<C64>::from_fn(4, 4, |i, j| normalized[(i, j)])
}

// ---------------------------------------------------------------------------
// Process reconstruction.
// ---------------------------------------------------------------------------

/// Options for the maximum-likelihood process fit.
#[derive(Debug, Clone)]
pub struct ProcessOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for ProcessOptions {
    fn default() -> Self {
        Self {
            starts: 3,
            max_iter: 3000,
            grad_tol: 1e-12,
            seed: 4242,
        }
    }
}

/// A fitted chi matrix with diagnostics.
#[derive(Debug, Clone)]
pub struct ProcessReconstruction {
    pub chi: ChiMatrix,
    /// Final scale-invariant residual (0 for exactly representable data).
    pub residual: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// The 16 preparation product states {H, V, D, R} x {H, V, D, R},
/// control-major order.
pub fn preparations_minimal() -> Vec<TwoQubitState> {
    let four = [PolBasis::H, PolBasis::V, PolBasis::D, PolBasis::R];
    let mut out = Vec::with_capacity(16);
    for c in four {
        for t in four {
            let ket = kron_ket(&c.ket(), &t.ket());
            out.push(TwoQubitState::from_pure(&ket).expect("product ket is normalized"));
        }
    }
    out
}

/// Fit a chi matrix to preparation/output pairs with default options.
pub fn reconstruct_process(
    preparations: &[TwoQubitState],
    outputs: &[TwoQubitState],
) -> Result<ProcessReconstruction> {
    reconstruct_process_with(preparations, outputs, &ProcessOptions::default())
}

/// Maximum-likelihood chi-matrix fit.
///
/// Finds the completely positive map, `chi = T^dagger T` up to trace
/// normalization, whose renormalized action on each preparation is closest
/// (summed squared Frobenius distance) to the given output state. Output
/// states are what a post-selected experiment reports, so overall success
/// scale is not recoverable and the returned chi has unit trace.
pub fn reconstruct_process_with(
    preparations: &[TwoQubitState],
    outputs: &[TwoQubitState],
    opts: &ProcessOptions,
) -> Result<ProcessReconstruction> {
    if preparations.len() != outputs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} preparations vs {} outputs",
            preparations.len(),
            outputs.len()
        )));
    }
    let prep_mats: Vec<Matrix4<C64>> = preparations.iter().map(|s| *s.matrix()).collect();
    let rank = projector_rank(&prep_mats);
    if rank < 16 {
        return Err(Error::RankDeficient { rank, needed: 16 });
    }

    let problem = ProcessProblem::new(preparations, outputs);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    // Maximally depolarizing start: chi = I/16.
    starts.push(upper_to_params(
        &(DMatrix::<C64>::identity(16, 16) * c64(0.25, 0.0)),
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < opts.starts.max(1) {
        let theta: Vec<f64> = (0..tri_param_count(16))
            .map(|_| 0.25 * crate::qubit::standard_normal(&mut rng))
            .collect();
        starts.push(theta);
    }
    starts.truncate(opts.starts.max(1));

    let bfgs_opts = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
    };
    let mut best: Option<crate::opt::BfgsOutcome> = None;
    for start in &starts {
        let outcome = bfgs(
            |x| problem.objective(x),
            |x| problem.gradient(x),
            start,
            &bfgs_opts,
        );
        if best.as_ref().is_none_or(|b| outcome.f < b.f) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one start");

    let t = params_to_upper(&best.x, 16);
    let chi_un = t.adjoint() * &t;
    let s = chi_un.trace().re;
    if s <= 0.0 {
        return Err(Error::SolverFailure(
            "process fit collapsed to zero trace".into(),
        ));
    }
    let chi = ChiMatrix::new(Chi16::from_fn(|m, n| chi_un[(m, n)] / c64(s, 0.0)))?;
    Ok(ProcessReconstruction {
        chi,
        residual: best.f,
        grad_norm: best.grad_norm,
        iterations: best.iterations,
        converged: best.converged,
        history: best.history,
    })
}

/// Residual-form fit data. The misfit is evaluated as
/// `sum_j || eps_chi(rho_j) - Tr[eps_chi(rho_j)] D_j ||_F^2` with the
/// residual matrices formed first and squared afterwards. Expanding the
/// same quantity as a quadratic form in vec(chi) would subtract O(1)
/// terms to produce the tiny result, flooring the attainable misfit near
/// 1e-14; the residual route keeps full relative precision all the way
/// down, which the noiseless reconstruction tolerances rely on.
struct ProcessProblem {
    /// Per preparation j, the products `P_m rho_j` for all 16 Paulis.
    left: Vec<[Matrix4<C64>; 16]>,
    /// Output density matrices D_j.
    targets: Vec<Matrix4<C64>>,
    paulis: [Matrix4<C64>; 16],
}

impl ProcessProblem {
    fn new(preparations: &[TwoQubitState], outputs: &[TwoQubitState]) -> Self {
        let paulis = pauli_basis();
        let left = preparations
            .iter()
            .map(|p| {
                let rho = p.matrix();
                core::array::from_fn(|m| paulis[m] * rho)
            })
            .collect();
        let targets = outputs.iter().map(|o| *o.matrix()).collect();
        ProcessProblem {
            left,
            targets,
            paulis,
        }
    }

    /// Row sums `Q_m = sum_n chi[m, n] P_n`, so that
    /// `eps_chi(rho_j) = sum_m (P_m rho_j) Q_m`.
    fn row_operators(&self, chi: &DMatrix<C64>) -> [Matrix4<C64>; 16] {
        core::array::from_fn(|m| {
            let mut q = Matrix4::zeros();
            for n in 0..16 {
                q += self.paulis[n] * chi[(m, n)];
            }
            q
        })
    }

    fn residual(&self, j: usize, q: &[Matrix4<C64>; 16]) -> Matrix4<C64> {
        let mut eps = Matrix4::zeros();
        for m in 0..16 {
            eps += self.left[j][m] * q[m];
        }
        eps - self.targets[j] * eps.trace()
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        let t = params_to_upper(theta, 16);
        let chi = t.adjoint() * t;
        let s = chi.trace().re;
        if s <= 0.0 {
            return f64::MAX;
        }
        let q = self.row_operators(&chi);
        let g: f64 = (0..self.left.len())
            .map(|j| self.residual(j, &q).norm_squared())
            .sum();
        g / (s * s)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let t = params_to_upper(theta, 16);
        let chi = t.adjoint() * &t;
        let s = chi.trace().re;
        if s <= 0.0 {
            return vec![0.0; tri_param_count(16)];
        }
        let q = self.row_operators(&chi);
        // dg = 2 Re sum_mn dchi[m, n] Z[m, n] with
        // Z[m, n] = sum_j Tr[(G_j P_m rho_j) P_n], G_j = R_j^H - Tr[R_j^H D_j] I.
        let mut g = 0.0;
        let mut z = DMatrix::<C64>::zeros(16, 16);
        for j in 0..self.left.len() {
            let r = self.residual(j, &q);
            g += r.norm_squared();
            let radj = r.adjoint();
            let gj = radj - Matrix4::identity() * (radj * self.targets[j]).trace();
            for m in 0..16 {
                let gb = gj * self.left[j][m];
                for n in 0..16 {
                    z[(m, n)] += (gb * self.paulis[n]).trace();
                }
            }
        }
        // dg = 4 Re Tr[dT (Y T^H)] with Y the Hermitized conj(Z).
        let y_raw = z.conjugate();
        let y = (&y_raw + y_raw.adjoint()) * c64(0.5, 0.0);
        let xmat = y * t.adjoint();
        // df = dg/s^2 - (2 g / s^3) ds, ds packed via the diagonal term.
        pack_gradient(16, 4.0 / (s * s), &xmat, -2.0 * g / (s * s * s), &t)
    }
}

// ---------------------------------------------------------------------------
// Parametric bootstrap.
// ---------------------------------------------------------------------------

/// Bootstrap summary for one scalar estimator.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over successful resamples.
    pub std: f64,
    pub n_success: usize,
    /// Resamples where the estimator returned an error.
    pub failures: usize,
}

/// Parametric bootstrap: re-draw each count Poisson around its observed
/// value, re-run `estimator`, and report mean and standard deviation.
///
/// Resample streams are derived deterministically from the records' own
/// seed, so repeated calls agree bit for bit. Estimator failures are
/// excluded and counted.
pub fn monte_carlo_errors(
    records: &[CountRecord],
    n_resamples: usize,
    estimator: impl Fn(&[CountRecord]) -> Result<f64>,
) -> Result<McEstimate> {
    if n_resamples < 2 {
        return Err(Error::ParamRange {
            name: "n_resamples",
            value: n_resamples as f64,
            low: 2.0,
            high: f64::INFINITY,
        });
    }
    if records.is_empty() {
        return Err(Error::DegenerateData("no count records".into()));
    }
    let base_seed = records[0].rng_seed ^ 0x9E37_79B9_7F4A_7C15;
    let mut values = Vec::with_capacity(n_resamples);
    let mut failures = 0usize;
    for r in 0..n_resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(r as u64 + 1);
        let resampled: Vec<CountRecord> = records
            .iter()
            .map(|rec| CountRecord {
                setting: rec.setting,
                count: draw_poisson(&mut rng, rec.count as f64),
                total_scale: rec.total_scale,
                rng_seed: rec.rng_seed,
            })
            .collect();
        match estimator(&resampled) {
            Ok(v) => values.push(v),
            Err(_) => failures += 1,
        }
    }
    if values.len() < 2 {
        return Err(Error::SolverFailure(format!(
            "estimator failed on {failures} of {n_resamples} resamples"
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        mean,
        std: var.sqrt(),
        n_success: values.len(),
        failures,
    })
}
