//! Post-selected two-photon controlled-Z gate constructions and Bell-state
//! analysis.
//!
//! Two architectures produce the same logical process:
//!
//! * [`build_ppbs_cz`]: one partially polarizing splitter (H reflectivity
//!   `eta1`, V fully reflected) straddling the control and target paths,
//!   half-wave plates exchanging H and V on both paths, then one loss-only
//!   polarizing splitter per path (`eta2`, `eta3`). The wave plates swap the
//!   polarization labels, so the instance carries `relabel = true` and all
//!   reported operators and processes are expressed in relabeled logical
//!   coordinates, where the ideal action at `eta = 1/3` is controlled-Z.
//! * [`build_interferometric_cz`]: polarizing splitters divert both H
//!   components onto auxiliary rails that meet at a central splitter of
//!   reflectivity `eta`, while both V components pass attenuators of
//!   intensity `eta`; reversed-port recombination restores the paths with
//!   no net relabeling.
//!
//! With all reflectivities `1/3` either construction maps the coincidence
//! subspace through `diag(1, 1, 1, -1) / 3`: a controlled-Z that succeeds
//! with probability 1/9 on every input.
//!
//! Photon distinguishability is modeled by a wave-packet overlap `V`: the
//! control photon defines the reference internal mode and the target photon
//! populates it with amplitude `sqrt(V)`. Coincidence detection cannot see
//! the internal label, so reported processes are internal-mode partial
//! traces.
//!
//! # Analyzer outcome labels
//!
//! [`analyze_bell`] reports probabilities for the four coincidence outcomes
//! `DD, AD, DA, AA` of diagonal-basis analyzers on control and target. The
//! control-arm labels are pinned to the convention `D = (|H> - |V>)/sqrt(2)`
//! and `A = (|H> + |V>)/sqrt(2)` (the target arm uses the usual
//! `D = (|H> + |V>)/sqrt(2)`), which makes the four rotated Bell states
//! [`bell_inputs`] land on `DD, AD, DA, AA` in listed order under the ideal
//! gate. The choice only names basis vectors; probabilities are unaffected.

use std::f64::consts::FRAC_PI_4;
use std::fmt;

use nalgebra::{DVector, Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{
    coincidence_amplitudes, evolve, postselect, reduce_to_qubits, ModeLabel, OccupancyPattern,
    PhotonicState, Polarization, TransferMatrix,
};
use crate::optics::{internal_amplitudes, internal_dim_for, Circuit, Element, PhotonRole};
use crate::process::TwoQubitProcess;
use crate::qubit::{c64, ket_a, ket_d, kron_ket, paulis, C64, TwoQubitState};

/// Spatial path carrying the control photon.
pub const CONTROL_PATH: u16 = 0;
/// Spatial path carrying the target photon.
pub const TARGET_PATH: u16 = 1;

/// Which physical construction a [`GateInstance`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateArchitecture {
    /// Partially polarizing splitters with wave-plate relabeling.
    Ppbs,
    /// Polarizing split, central splitter on H rails, attenuated V rails.
    Interferometric,
}

impl fmt::Display for GateArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ppbs => write!(f, "ppbs"),
            Self::Interferometric => write!(f, "interferometric"),
        }
    }
}

/// A compiled gate: circuit, transfer matrix, and physical parameters.
#[derive(Debug, Clone)]
pub struct GateInstance {
    circuit: Circuit,
    transfer: TransferMatrix,
    etas: [f64; 3],
    overlap: f64,
    relabel: bool,
    architecture: GateArchitecture,
}

/// Controlled-Z from one partially polarizing splitter plus per-path loss.
///
/// `eta1` is the H reflectivity of the central splitter; `eta2` and `eta3`
/// are the H transmissions of the control- and target-path loss stages.
/// `overlap` is the wave-packet overlap of the photon pair (1 = ideal).
pub fn build_ppbs_cz(eta1: f64, eta2: f64, eta3: f64, overlap: f64) -> Result<GateInstance> {
    let internal_dim = internal_dim_for(overlap);
    let mut circuit = Circuit::new(2, internal_dim)?;
    circuit.push(Element::ppbs(CONTROL_PATH, TARGET_PATH, eta1, 1.0)?)?;
    circuit.push(Element::hwp(CONTROL_PATH, FRAC_PI_4))?;
    circuit.push(Element::hwp(TARGET_PATH, FRAC_PI_4))?;
    circuit.push(Element::ppbs_loss(CONTROL_PATH, eta2, 1.0)?)?;
    circuit.push(Element::ppbs_loss(TARGET_PATH, eta3, 1.0)?)?;
    let transfer = circuit.compile()?;
    // Reject overlap out of range before any evolution sees it.
    internal_amplitudes(overlap, PhotonRole::Partner)?;
    Ok(GateInstance {
        circuit,
        transfer,
        etas: [eta1, eta2, eta3],
        overlap,
        relabel: true,
        architecture: GateArchitecture::Ppbs,
    })
}

/// Controlled-Z from a central splitter on polarizing-split H rails.
///
/// Paths 2 and 3 are the control and target H rails. The recombining
/// polarizing splitters take the rail as their first port, which flips the
/// sign of the returning amplitude relative to the splitting step and makes
/// the round trip for a lone H photon carry amplitude `+sqrt(eta)` overall.
pub fn build_interferometric_cz(eta: f64, overlap: f64) -> Result<GateInstance> {
    let internal_dim = internal_dim_for(overlap);
    let mut circuit = Circuit::new(4, internal_dim)?;
    circuit.push(Element::pbs(CONTROL_PATH, 2)?)?;
    circuit.push(Element::pbs(TARGET_PATH, 3)?)?;
    circuit.push(Element::bs(2, 3, eta)?)?;
    circuit.push(Element::loss(CONTROL_PATH, eta)?)?;
    circuit.push(Element::loss(TARGET_PATH, eta)?)?;
    circuit.push(Element::pbs(2, CONTROL_PATH)?)?;
    circuit.push(Element::pbs(3, TARGET_PATH)?)?;
    let transfer = circuit.compile()?;
    internal_amplitudes(overlap, PhotonRole::Partner)?;
    Ok(GateInstance {
        circuit,
        transfer,
        etas: [eta; 3],
        overlap,
        relabel: false,
        architecture: GateArchitecture::Interferometric,
    })
}

impl GateInstance {
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn transfer(&self) -> &TransferMatrix {
        &self.transfer
    }

    pub fn etas(&self) -> [f64; 3] {
        self.etas
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    /// True when reported operators are expressed in relabeled coordinates.
    pub fn relabel(&self) -> bool {
        self.relabel
    }

    pub fn architecture(&self) -> GateArchitecture {
        self.architecture
    }

    /// Rebuild the same construction with a different wave-packet overlap.
    pub fn with_overlap(&self, overlap: f64) -> Result<Self> {
        match self.architecture {
            GateArchitecture::Ppbs => {
                build_ppbs_cz(self.etas[0], self.etas[1], self.etas[2], overlap)
            }
            GateArchitecture::Interferometric => {
                build_interferometric_cz(self.etas[0], overlap)
            }
        }
    }

    /// Photonic input for a logical two-qubit ket.
    ///
    /// Logical 1 is horizontal polarization. The control photon takes
    /// internal index 0; the target photon spreads over internal indices
    /// according to the instance overlap.
    pub fn prepare_input(&self, ket: &Vector4<C64>) -> Result<PhotonicState> {
        let norm = ket.norm();
        if norm < 1e-12 {
            return Err(Error::ZeroNorm);
        }
        let partner = internal_amplitudes(self.overlap, PhotonRole::Partner)?;
        let mut terms = Vec::new();
        for idx in 0..4 {
            let amp = ket[idx] / c64(norm, 0.0);
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let pol_c = if idx / 2 == 1 {
                Polarization::H
            } else {
                Polarization::V
            };
            let pol_t = if idx % 2 == 1 {
                Polarization::H
            } else {
                Polarization::V
            };
            for &(internal, weight) in &partner {
                terms.push((
                    vec![
                        ModeLabel::new(CONTROL_PATH, pol_c, 0),
                        ModeLabel::new(TARGET_PATH, pol_t, internal),
                    ],
                    amp * c64(weight, 0.0),
                ));
            }
        }
        PhotonicState::new(terms)
    }

    /// Run a pure logical input through the gate and post-select coincidence.
    ///
    /// Returns the (relabeled) output state and the success probability.
    pub fn apply_ket(&self, ket: &Vector4<C64>) -> Result<(TwoQubitState, f64)> {
        let input = self.prepare_input(ket)?;
        let evolved = evolve(&input, &self.transfer)?;
        let pattern = OccupancyPattern::coincidence(&[CONTROL_PATH, TARGET_PATH]);
        let (kept, probability) = postselect(&evolved, &pattern)?;
        let reduced = reduce_to_qubits(&kept, CONTROL_PATH, TARGET_PATH)?;
        let out = if self.relabel {
            reduced.conjugate(&relabel_operator())?
        } else {
            reduced
        };
        Ok((out, probability))
    }

    /// Post-selection success probability for a pure logical input.
    pub fn success_probability(&self, ket: &Vector4<C64>) -> Result<f64> {
        Ok(self.apply_ket(ket)?.1)
    }

    /// The full coincidence process of this gate as a two-qubit channel.
    ///
    /// Built by evolving the four basis kets, collecting unnormalized
    /// coincidence amplitudes, and tracing over internal labels. Basis
    /// inputs whose output is entirely removed by post-selection contribute
    /// zero blocks rather than an error.
    pub fn process(&self) -> Result<TwoQubitProcess> {
        let d = self.circuit.internal_dim() as usize;
        let side = 2 * d;
        let mut vectors: Vec<DVector<C64>> = Vec::with_capacity(4);
        for a in 0..4 {
            let mut ket = Vector4::<C64>::zeros();
            ket[a] = c64(1.0, 0.0);
            let input = self.prepare_input(&ket)?;
            let w = match evolve(&input, &self.transfer) {
                Ok(evolved) => {
                    coincidence_amplitudes(&evolved, CONTROL_PATH, TARGET_PATH, d)?
                }
                Err(Error::ZeroNorm) => DVector::zeros(side * side),
                Err(e) => return Err(e),
            };
            vectors.push(w);
        }

        let mut blocks = [[Matrix4::<C64>::zeros(); 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                let mut block = Matrix4::<C64>::zeros();
                for qc in 0..2 {
                    for qt in 0..2 {
                        for qc2 in 0..2 {
                            for qt2 in 0..2 {
                                let mut sum = c64(0.0, 0.0);
                                for ic in 0..d {
                                    for it in 0..d {
                                        let left = (qc * d + ic) * side + (qt * d + it);
                                        let right = (qc2 * d + ic) * side + (qt2 * d + it);
                                        sum += vectors[a][left] * vectors[b][right].conj();
                                    }
                                }
                                block[(qc * 2 + qt, qc2 * 2 + qt2)] = sum;
                            }
                        }
                    }
                }
                blocks[a][b] = block;
            }
        }

        if self.relabel {
            let r = relabel_operator();
            for row in &mut blocks {
                for block in row.iter_mut() {
                    *block = r * *block * r;
                }
            }
        }
        TwoQubitProcess::from_blocks(blocks)
    }

    /// The single operator inducing this gate on the coincidence subspace.
    ///
    /// Only defined for fully indistinguishable photons; with overlap below
    /// one the process needs more than one Kraus operator and this errors.
    pub fn induced_operator(&self) -> Result<Matrix4<C64>> {
        if self.overlap < 1.0 {
            return Err(Error::InvalidMatrix {
                kind: "induced operator",
                reason: format!(
                    "wave-packet overlap {} < 1 gives a rank-2 process",
                    self.overlap
                ),
            });
        }
        let d = self.circuit.internal_dim() as usize;
        let side = 2 * d;
        let mut op = Matrix4::<C64>::zeros();
        for a in 0..4 {
            let mut ket = Vector4::<C64>::zeros();
            ket[a] = c64(1.0, 0.0);
            let input = self.prepare_input(&ket)?;
            let w = match evolve(&input, &self.transfer) {
                Ok(evolved) => {
                    coincidence_amplitudes(&evolved, CONTROL_PATH, TARGET_PATH, d)?
                }
                Err(Error::ZeroNorm) => DVector::zeros(side * side),
                Err(e) => return Err(e),
            };
            for qc in 0..2 {
                for qt in 0..2 {
                    op[(qc * 2 + qt, a)] = w[(qc * d) * side + qt * d];
                }
            }
        }
        if self.relabel {
            op = relabel_operator() * op;
        }
        Ok(op)
    }
}

/// The label-swap operator X (x) X used by wave-plate-relabeled gates.
fn relabel_operator() -> Matrix4<C64> {
    let x = paulis()[1];
    crate::qubit::kron_op(&x, &x)
}

/// Logical ket `(|HH> + e^{i phi} |VV>) / sqrt(2)` from the photon-pair
/// source, with `|HH>` the logical `|11>` component.
pub fn source_ket(phi: f64) -> Vector4<C64> {
    let mut ket = Vector4::<C64>::zeros();
    let amp = c64(0.5_f64.sqrt(), 0.0);
    ket[3] = amp;
    ket[0] = Complex64::from_polar(0.5_f64.sqrt(), phi);
    ket
}

/// Density-matrix form of [`source_ket`].
pub fn source_state(phi: f64) -> TwoQubitState {
    TwoQubitState::from_pure(&source_ket(phi)).expect("source ket is normalized")
}

/// Labels for the rotated Bell states accepted by the analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellLabel {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PsiPlus => write!(f, "psi+"),
            Self::PsiMinus => write!(f, "psi-"),
            Self::PhiPlus => write!(f, "phi+"),
            Self::PhiMinus => write!(f, "phi-"),
        }
    }
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
    ];
}

/// Coincidence outcomes of the two diagonal-basis analyzers, control first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellOutcome {
    DD,
    AD,
    DA,
    AA,
}

impl fmt::Display for BellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DD => write!(f, "DD"),
            Self::AD => write!(f, "AD"),
            Self::DA => write!(f, "DA"),
            Self::AA => write!(f, "AA"),
        }
    }
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::DD,
        BellOutcome::AD,
        BellOutcome::DA,
        BellOutcome::AA,
    ];
}

/// One analyzer input: a rotated Bell state and its label.
#[derive(Debug, Clone)]
pub struct BellInput {
    pub label: BellLabel,
    pub ket: Vector4<C64>,
}

/// The four rotated Bell states distinguished by the analyzer:
/// `psi'+- = (|HA> +- |VD>) / sqrt(2)` and `phi'+- = (|HD> +- |VA>) / sqrt(2)`
/// with the standard `D = (|H> + |V>)/sqrt(2)`, `A = (|H> - |V>)/sqrt(2)`.
pub fn bell_inputs() -> [BellInput; 4] {
    let h = crate::qubit::ket_h();
    let v = crate::qubit::ket_v();
    let half = c64(0.5_f64.sqrt(), 0.0);
    let make = |first: Vector4<C64>, second: Vector4<C64>, sign: f64| {
        (first + second * c64(sign, 0.0)) * half
    };
    [
        BellInput {
            label: BellLabel::PsiPlus,
            ket: make(kron_ket(&h, &ket_a()), kron_ket(&v, &ket_d()), 1.0),
        },
        BellInput {
            label: BellLabel::PsiMinus,
            ket: make(kron_ket(&h, &ket_a()), kron_ket(&v, &ket_d()), -1.0),
        },
        BellInput {
            label: BellLabel::PhiPlus,
            ket: make(kron_ket(&h, &ket_d()), kron_ket(&v, &ket_a()), 1.0),
        },
        BellInput {
            label: BellLabel::PhiMinus,
            ket: make(kron_ket(&h, &ket_d()), kron_ket(&v, &ket_a()), -1.0),
        },
    ]
}

/// The analyzer outcome each rotated Bell state maps to under the ideal gate.
pub fn expected_outcome(label: BellLabel) -> BellOutcome {
    match label {
        BellLabel::PsiPlus => BellOutcome::DD,
        BellLabel::PsiMinus => BellOutcome::AD,
        BellLabel::PhiPlus => BellOutcome::DA,
        BellLabel::PhiMinus => BellOutcome::AA,
    }
}

/// Analyzer probabilities for one input state sent through a gate.
#[derive(Debug, Clone)]
pub struct BellAnalysis {
    /// Outcome probabilities in [`BellOutcome::ALL`] order; they sum to 1.
    pub probabilities: [f64; 4],
    /// Coincidence post-selection probability of the gate for this input.
    pub success_probability: f64,
}

/// Send `state` through `gate` and read out both photons in the diagonal
/// basis (outcome labels pinned as described in the module docs).
pub fn analyze_bell(state: &TwoQubitState, gate: &GateInstance) -> Result<BellAnalysis> {
    let process = gate.process()?;
    let (out, success_probability) = process.apply(state)?;

    // Control-arm labels are intentionally swapped relative to the target.
    let control_kets = [ket_a(), ket_d()]; // D label, A label
    let target_kets = [ket_d(), ket_a()];
    let mut probabilities = [0.0; 4];
    for (k, outcome) in BellOutcome::ALL.iter().enumerate() {
        let (ci, ti) = match outcome {
            BellOutcome::DD => (0, 0),
            BellOutcome::AD => (1, 0),
            BellOutcome::DA => (0, 1),
            BellOutcome::AA => (1, 1),
        };
        let ket = kron_ket(&control_kets[ci], &target_kets[ti]);
        let projector = ket * ket.adjoint();
        probabilities[k] = out.expect(&projector).re.max(0.0);
    }
    Ok(BellAnalysis {
        probabilities,
        success_probability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::chi_ideal_cz;
    use crate::qubit::{cz, random_pure_ket};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const ETA: f64 = 1.0 / 3.0;

    fn ideal_gate() -> GateInstance {
        build_ppbs_cz(ETA, ETA, ETA, 1.0).unwrap()
    }

    #[test]
    fn ideal_induced_operator_is_cz_over_three() {
        let op = ideal_gate().induced_operator().unwrap();
        let expected = cz() / c64(3.0, 0.0);
        assert_abs_diff_eq!((op - expected).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn general_reflectivities_give_the_derived_diagonal() {
        // Independent derivation: the coincidence map is diagonal in the
        // logical basis with entries (sqrt(eta2 eta3), sqrt(eta1 eta2),
        // sqrt(eta1 eta3), 2 eta1 - 1) once relabeled.
        let (e1, e2, e3) = (0.28, 0.28, 0.29);
        let op = build_ppbs_cz(e1, e2, e3, 1.0)
            .unwrap()
            .induced_operator()
            .unwrap();
        let expected = [
            (e2 * e3).sqrt(),
            (e1 * e2).sqrt(),
            (e1 * e3).sqrt(),
            2.0 * e1 - 1.0,
        ];
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { expected[i] } else { 0.0 };
                assert_abs_diff_eq!(op[(i, j)].re, want, epsilon = 1e-12);
                assert_abs_diff_eq!(op[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn every_input_succeeds_with_probability_one_ninth() {
        let gate = ideal_gate();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let ket = random_pure_ket(&mut rng);
            let (out, p) = gate.apply_ket(&ket).unwrap();
            assert_relative_eq!(p, 1.0 / 9.0, epsilon = 1e-12);
            // Output must match CZ acting on the input.
            let expected = TwoQubitState::from_pure(&(cz() * ket)).unwrap();
            assert_abs_diff_eq!(
                (out.matrix() - expected.matrix()).norm(),
                0.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn ideal_process_chi_matches_cz() {
        let process = ideal_gate().process().unwrap();
        let chi = process.chi().unwrap();
        let ideal = chi_ideal_cz();
        assert_abs_diff_eq!(
            (chi.matrix() - ideal.matrix()).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(process.mean_success_probability(), 1.0 / 9.0, epsilon = 1e-12);
        assert_eq!(process.kraus_rank(1e-9), 1);
    }

    #[test]
    fn reduced_overlap_splits_the_process_into_two_kraus_terms() {
        let gate = build_ppbs_cz(ETA, ETA, ETA, 0.7).unwrap();
        let process = gate.process().unwrap();
        assert_eq!(process.kraus_rank(1e-9), 2);
        assert!(gate.induced_operator().is_err());
    }

    #[test]
    fn interferometric_construction_matches_ppbs_gate() {
        for eta in [1.0 / 3.0, 0.28] {
            for overlap in [1.0, 0.7] {
                let a = build_ppbs_cz(eta, eta, eta, overlap).unwrap();
                let b = build_interferometric_cz(eta, overlap).unwrap();
                let chi_a = a.process().unwrap().chi_unnormalized();
                let chi_b = b.process().unwrap().chi_unnormalized();
                assert_abs_diff_eq!((chi_a - chi_b).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn interferometric_limits_behave_as_expected() {
        // Fully transmissive central splitter: only |HH> survives, via a
        // perfect swap of the two photons.
        let gate = build_interferometric_cz(0.0, 1.0).unwrap();
        let mut hh = Vector4::<C64>::zeros();
        hh[3] = c64(1.0, 0.0);
        let (_, p) = gate.apply_ket(&hh).unwrap();
        assert_relative_eq!(p, 1.0, epsilon = 1e-12);
        let mut vv = Vector4::<C64>::zeros();
        vv[0] = c64(1.0, 0.0);
        assert!(matches!(
            gate.apply_ket(&vv),
            Err(Error::NullPostSelection) | Err(Error::ZeroNorm)
        ));

        // Balanced central splitter: |HH> interferes to zero coincidence.
        let gate = build_interferometric_cz(0.5, 1.0).unwrap();
        assert!(matches!(
            gate.apply_ket(&hh),
            Err(Error::NullPostSelection)
        ));
    }

    #[test]
    fn source_states_transform_correctly() {
        let gate = ideal_gate();
        let ket = source_ket(0.0);
        let (out, p) = gate.apply_ket(&ket).unwrap();
        assert_relative_eq!(p, 1.0 / 9.0, epsilon = 1e-12);
        let expected = TwoQubitState::from_pure(&(cz() * ket)).unwrap();
        assert_abs_diff_eq!(
            (out.matrix() - expected.matrix()).norm(),
            0.0,
            epsilon = 1e-10
        );
        // A source phase shows up as the relative phase of the |VV> term.
        let phased = source_ket(1.2);
        assert_relative_eq!(phased[0].arg(), 1.2, epsilon = 1e-12);
    }

    #[test]
    fn bell_inputs_are_orthonormal() {
        let inputs = bell_inputs();
        for (i, a) in inputs.iter().enumerate() {
            for (j, b) in inputs.iter().enumerate() {
                let overlap: C64 = a.ket.dotc(&b.ket);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(overlap.norm(), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ideal_analyzer_routes_each_bell_state_to_its_outcome() {
        let gate = ideal_gate();
        for input in bell_inputs() {
            let state = TwoQubitState::from_pure(&input.ket).unwrap();
            let analysis = analyze_bell(&state, &gate).unwrap();
            let expected = expected_outcome(input.label);
            for (k, outcome) in BellOutcome::ALL.iter().enumerate() {
                let want = if *outcome == expected { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(analysis.probabilities[k], want, epsilon = 1e-10);
            }
            assert_relative_eq!(analysis.success_probability, 1.0 / 9.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn distinguishable_photons_destroy_the_bell_discrimination() {
        let gate = build_ppbs_cz(ETA, ETA, ETA, 0.0).unwrap();
        let mut mean_diag = 0.0;
        for input in bell_inputs() {
            let state = TwoQubitState::from_pure(&input.ket).unwrap();
            let analysis = analyze_bell(&state, &gate).unwrap();
            let k = BellOutcome::ALL
                .iter()
                .position(|o| *o == expected_outcome(input.label))
                .unwrap();
            mean_diag += analysis.probabilities[k] / 4.0;
            let total: f64 = analysis.probabilities.iter().sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-10);
        }
        assert!(
            mean_diag <= 0.5,
            "mean diagonal {mean_diag} should collapse to coin-flip level"
        );
    }

    #[test]
    fn prepare_input_validates_and_normalizes() {
        let gate = ideal_gate();
        assert!(gate.prepare_input(&Vector4::zeros()).is_err());
        let mut ket = Vector4::<C64>::zeros();
        ket[1] = c64(2.0, 0.0); // unnormalized on purpose
        let state = gate.prepare_input(&ket).unwrap();
        assert_relative_eq!(state.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn with_overlap_preserves_architecture_and_etas() {
        let gate = build_ppbs_cz(0.3, 0.31, 0.32, 1.0).unwrap();
        let softened = gate.with_overlap(0.9).unwrap();
        assert_eq!(softened.etas(), [0.3, 0.31, 0.32]);
        assert_eq!(softened.architecture(), GateArchitecture::Ppbs);
        assert_relative_eq!(softened.overlap(), 0.9);
        let interf = build_interferometric_cz(0.28, 1.0)
            .unwrap()
            .with_overlap(0.5)
            .unwrap();
        assert_eq!(interf.architecture(), GateArchitecture::Interferometric);
    }
}
