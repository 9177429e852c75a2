//! Linear-optical elements and circuits over polarization-resolved modes.
//!
//! # Beamsplitter sign convention
//!
//! Every splitter in this crate uses the real rotation form. For ordered
//! ports `(a, b)` and reflectivity `eta`, the single-polarization block is
//!
//! ```text
//! | out_a |   |  sqrt(eta)        -sqrt(1 - eta) | | in_a |
//! | out_b | = |  sqrt(1 - eta)     sqrt(eta)     | | in_b |
//! ```
//!
//! so reflection keeps a photon in its port with amplitude `+sqrt(eta)` and
//! the two cross-port amplitudes carry opposite signs. Consequences used
//! throughout:
//!
//! * the two-photon coincidence amplitude through one splitter is
//!   `2 eta - 1`: zero at a balanced splitter (complete bunching) and `-1/3`
//!   at `eta = 1/3`;
//! * a fully reflective polarization (`eta = 1`) acts as the identity on
//!   that polarization, with no extra pi phase between the ports.
//!
//! Any globally consistent convention describes the same physics; this one
//! makes the sign of the two-photon interference term explicit in the
//! matrix entries rather than hidden in a relabeling.
//!
//! Polarizing elements factor into one such block per polarization.
//! Wave-plate Jones matrices are written in the physical `(H, V)` component
//! order; [`jones_to_logical`] converts to the logical qubit component
//! order used by [`crate::qubit`].

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{ModeLabel, Polarization, TransferMatrix};
use crate::opt::{nelder_mead, NmOptions, NmOutcome};
use crate::qubit::{c64, C64};

/// Physical kinds of element supported by [`Circuit`].
#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    /// Two-port splitter with independent reflectivities per polarization.
    PartialPolarizing { eta_h: f64, eta_v: f64 },
    /// Single-port stand-in for a splitter whose second port is discarded:
    /// applies amplitude `sqrt(eta)` per polarization on the kept port.
    PolarizingLoss { eta_h: f64, eta_v: f64 },
    /// Polarization-independent two-port splitter.
    Splitter { eta: f64 },
    /// Half-wave plate at angle `theta` to the H axis.
    HalfWave { theta: f64 },
    /// Quarter-wave plate at angle `theta` to the H axis.
    QuarterWave { theta: f64 },
    /// Polarization-independent amplitude damping on one path.
    Loss { transmission: f64 },
    /// Polarization-independent phase `exp(i phi)` on one path.
    Phase { phi: f64 },
}

/// One placed element: a kind plus the spatial paths it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    kind: ElementKind,
    paths: Vec<u16>,
}

fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(Error::ParamRange {
            name,
            value,
            low: 0.0,
            high: 1.0,
        });
    }
    Ok(value)
}

impl Element {
    /// Partially polarizing splitter on ports `(a, b)` with per-polarization
    /// reflectivities.
    pub fn ppbs(a: u16, b: u16, eta_h: f64, eta_v: f64) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidMatrix {
                kind: "element",
                reason: format!("splitter ports must differ, got ({a}, {b})"),
            });
        }
        Ok(Self {
            kind: ElementKind::PartialPolarizing {
                eta_h: check_unit("eta_h", eta_h)?,
                eta_v: check_unit("eta_v", eta_v)?,
            },
            paths: vec![a, b],
        })
    }

    /// Polarizing beamsplitter: reflects V, transmits H.
    pub fn pbs(a: u16, b: u16) -> Result<Self> {
        Self::ppbs(a, b, 0.0, 1.0)
    }

    /// Splitter on `path` whose other port is vacuum in and discarded out.
    ///
    /// Keeping only the reflected port of the [`Element::ppbs`] block leaves
    /// the diagonal `sqrt(eta)` per polarization, which is what this applies.
    pub fn ppbs_loss(path: u16, eta_h: f64, eta_v: f64) -> Result<Self> {
        Ok(Self {
            kind: ElementKind::PolarizingLoss {
                eta_h: check_unit("eta_h", eta_h)?,
                eta_v: check_unit("eta_v", eta_v)?,
            },
            paths: vec![path],
        })
    }

    /// Polarization-independent splitter on ports `(a, b)`.
    pub fn bs(a: u16, b: u16, eta: f64) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidMatrix {
                kind: "element",
                reason: format!("splitter ports must differ, got ({a}, {b})"),
            });
        }
        Ok(Self {
            kind: ElementKind::Splitter {
                eta: check_unit("eta", eta)?,
            },
            paths: vec![a, b],
        })
    }

    /// Half-wave plate on `path`.
    pub fn hwp(path: u16, theta: f64) -> Self {
        Self {
            kind: ElementKind::HalfWave { theta },
            paths: vec![path],
        }
    }

    /// Quarter-wave plate on `path`.
    pub fn qwp(path: u16, theta: f64) -> Self {
        Self {
            kind: ElementKind::QuarterWave { theta },
            paths: vec![path],
        }
    }

    /// Amplitude damping with intensity `transmission` on `path`.
    pub fn loss(path: u16, transmission: f64) -> Result<Self> {
        Ok(Self {
            kind: ElementKind::Loss {
                transmission: check_unit("transmission", transmission)?,
            },
            paths: vec![path],
        })
    }

    /// Phase `exp(i phi)` on `path`.
    pub fn phase(path: u16, phi: f64) -> Self {
        Self {
            kind: ElementKind::Phase { phi },
            paths: vec![path],
        }
    }

    pub fn kind(&self) -> &ElementKind {
        &self.kind
    }

    pub fn paths(&self) -> &[u16] {
        &self.paths
    }
}

/// Splitter block in the rotation convention (see module docs).
pub fn splitter_block(eta: f64) -> Matrix2<C64> {
    let r = eta.sqrt();
    let t = (1.0 - eta).sqrt();
    Matrix2::new(c64(r, 0.0), c64(-t, 0.0), c64(t, 0.0), c64(r, 0.0))
}

/// Half-wave plate Jones matrix in `(H, V)` component order.
///
/// `theta = pi/4` exchanges H and V; `theta = pi/8` maps H to the diagonal
/// state; `theta = 0` flips the sign of V. Squares to the identity.
pub fn hwp_jones(theta: f64) -> Matrix2<C64> {
    let c = (2.0 * theta).cos();
    let s = (2.0 * theta).sin();
    Matrix2::new(c64(c, 0.0), c64(s, 0.0), c64(s, 0.0), c64(-c, 0.0))
}

/// Quarter-wave plate Jones matrix in `(H, V)` component order.
///
/// `theta = 0` leaves H alone and advances V by `pi/2`.
pub fn qwp_jones(theta: f64) -> Matrix2<C64> {
    let c = theta.cos();
    let s = theta.sin();
    Matrix2::new(
        Complex64::new(c * c, s * s),
        Complex64::new(s * c, -s * c),
        Complex64::new(s * c, -s * c),
        Complex64::new(s * s, c * c),
    )
}

/// Convert a `(H, V)`-ordered Jones matrix to the logical component order
/// of [`crate::qubit`] (index 0 logical zero, i.e. V).
pub fn jones_to_logical(j: &Matrix2<C64>) -> Matrix2<C64> {
    // Swap both rows and columns.
    Matrix2::new(j[(1, 1)], j[(1, 0)], j[(0, 1)], j[(0, 0)])
}

/// A sequence of elements over `path_count` spatial paths.
///
/// The compiled transfer matrix is indexed by every [`ModeLabel`] with
/// `spatial < path_count`, both polarizations, and `internal < internal_dim`,
/// in the canonical sorted label order.
#[derive(Debug, Clone)]
pub struct Circuit {
    path_count: u16,
    internal_dim: u8,
    elements: Vec<Element>,
}

impl Circuit {
    pub fn new(path_count: u16, internal_dim: u8) -> Result<Self> {
        if path_count == 0 {
            return Err(Error::ParamRange {
                name: "path_count",
                value: 0.0,
                low: 1.0,
                high: f64::from(u16::MAX),
            });
        }
        if internal_dim == 0 {
            return Err(Error::ParamRange {
                name: "internal_dim",
                value: 0.0,
                low: 1.0,
                high: f64::from(u8::MAX),
            });
        }
        Ok(Self {
            path_count,
            internal_dim,
            elements: Vec::new(),
        })
    }

    pub fn path_count(&self) -> u16 {
        self.path_count
    }

    pub fn internal_dim(&self) -> u8 {
        self.internal_dim
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    /// Append an element, validating its paths against this circuit.
    pub fn push(&mut self, element: Element) -> Result<&mut Self> {
        for &p in element.paths() {
            if p >= self.path_count {
                return Err(Error::PathOutOfRange {
                    path: p as usize,
                    path_count: self.path_count as usize,
                });
            }
        }
        self.elements.push(element);
        Ok(self)
    }

    /// All mode labels of this circuit in canonical sorted order.
    pub fn modes(&self) -> Vec<ModeLabel> {
        let mut modes = Vec::new();
        for spatial in 0..self.path_count {
            for polarization in [Polarization::H, Polarization::V] {
                for internal in 0..self.internal_dim {
                    modes.push(ModeLabel {
                        spatial,
                        polarization,
                        internal,
                    });
                }
            }
        }
        modes
    }

    fn mode_index(&self, path: u16, pol: Polarization, internal: u8) -> usize {
        let d = self.internal_dim as usize;
        (path as usize * 2 + pol.block_index()) * d + internal as usize
    }

    /// Compile to a single-photon transfer matrix (later elements leftmost).
    pub fn compile(&self) -> Result<TransferMatrix> {
        if self.elements.is_empty() {
            return Err(Error::EmptyCircuit);
        }
        let modes = self.modes();
        let dim = modes.len();
        let mut full = DMatrix::<C64>::identity(dim, dim);
        for element in &self.elements {
            let step = self.embed(element);
            full = step * full;
        }
        TransferMatrix::new(full, modes.clone(), modes)
    }

    fn embed(&self, element: &Element) -> DMatrix<C64> {
        let d = self.internal_dim;
        let dim = self.path_count as usize * 2 * d as usize;
        let mut m = DMatrix::<C64>::identity(dim, dim);
        let set_block = |m: &mut DMatrix<C64>,
                         rows: [(u16, Polarization); 2],
                         cols: [(u16, Polarization); 2],
                         block: &Matrix2<C64>| {
            for internal in 0..d {
                for (bi, &(rp, rpol)) in rows.iter().enumerate() {
                    for (bj, &(cp, cpol)) in cols.iter().enumerate() {
                        let r = self.mode_index(rp, rpol, internal);
                        let c = self.mode_index(cp, cpol, internal);
                        m[(r, c)] = block[(bi, bj)];
                    }
                }
            }
        };

        match element.kind() {
            ElementKind::PartialPolarizing { eta_h, eta_v } => {
                let (a, b) = (element.paths[0], element.paths[1]);
                for (pol, eta) in [(Polarization::H, *eta_h), (Polarization::V, *eta_v)] {
                    set_block(
                        &mut m,
                        [(a, pol), (b, pol)],
                        [(a, pol), (b, pol)],
                        &splitter_block(eta),
                    );
                }
            }
            ElementKind::PolarizingLoss { eta_h, eta_v } => {
                let p = element.paths[0];
                for (pol, eta) in [(Polarization::H, *eta_h), (Polarization::V, *eta_v)] {
                    for internal in 0..d {
                        let k = self.mode_index(p, pol, internal);
                        m[(k, k)] = c64(eta.sqrt(), 0.0);
                    }
                }
            }
            ElementKind::Splitter { eta } => {
                let (a, b) = (element.paths[0], element.paths[1]);
                for pol in [Polarization::H, Polarization::V] {
                    set_block(
                        &mut m,
                        [(a, pol), (b, pol)],
                        [(a, pol), (b, pol)],
                        &splitter_block(*eta),
                    );
                }
            }
            ElementKind::HalfWave { theta } => {
                let p = element.paths[0];
                set_block(
                    &mut m,
                    [(p, Polarization::H), (p, Polarization::V)],
                    [(p, Polarization::H), (p, Polarization::V)],
                    &hwp_jones(*theta),
                );
            }
            ElementKind::QuarterWave { theta } => {
                let p = element.paths[0];
                set_block(
                    &mut m,
                    [(p, Polarization::H), (p, Polarization::V)],
                    [(p, Polarization::H), (p, Polarization::V)],
                    &qwp_jones(*theta),
                );
            }
            ElementKind::Loss { transmission } => {
                let p = element.paths[0];
                let amp = c64(transmission.sqrt(), 0.0);
                for pol in [Polarization::H, Polarization::V] {
                    for internal in 0..d {
                        let k = self.mode_index(p, pol, internal);
                        m[(k, k)] = amp;
                    }
                }
            }
            ElementKind::Phase { phi } => {
                let p = element.paths[0];
                let amp = Complex64::from_polar(1.0, *phi);
                for pol in [Polarization::H, Polarization::V] {
                    for internal in 0..d {
                        let k = self.mode_index(p, pol, internal);
                        m[(k, k)] = amp;
                    }
                }
            }
        }
        m
    }
}

/// Which of the two photons a prepared internal wave packet belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonRole {
    /// Defines the reference wave packet (internal index 0).
    Reference,
    /// Overlaps the reference with amplitude `sqrt(overlap)`.
    Partner,
}

/// Internal-mode amplitudes for a photon with the given wave-packet overlap.
///
/// The reference photon occupies internal index 0. The partner photon is
/// `sqrt(overlap)` on index 0 and `sqrt(1 - overlap)` on index 1, so a pair
/// with `overlap = 1` is fully indistinguishable and `overlap = 0` fully
/// distinguishable. Entries with zero amplitude are dropped.
pub fn internal_amplitudes(overlap: f64, role: PhotonRole) -> Result<Vec<(u8, f64)>> {
    check_unit("overlap", overlap)?;
    let amps = match role {
        PhotonRole::Reference => vec![(0, 1.0)],
        PhotonRole::Partner => vec![(0, overlap.sqrt()), (1, (1.0 - overlap).sqrt())],
    };
    Ok(amps.into_iter().filter(|&(_, a)| a != 0.0).collect())
}

/// Minimum internal dimension needed to represent a pair with this overlap.
pub fn internal_dim_for(overlap: f64) -> u8 {
    if overlap >= 1.0 {
        1
    } else {
        2
    }
}

/// Wave-plate angles `(qwp_theta, hwp_theta)` preparing `target` from H.
///
/// `target` is a normalized single-qubit ket in logical component order.
/// The preparation applies the half-wave plate first, then the quarter-wave
/// plate, matching a source that emits H into a two-plate stage. Found by a
/// short multi-start simplex search; the returned infidelity is below 1e-10
/// for any pure target.
pub fn fit_waveplate_angles(target: &Vector2<C64>) -> Result<(f64, f64)> {
    let norm = target.norm();
    if norm < 1e-12 {
        return Err(Error::ZeroNorm);
    }
    let t = target / c64(norm, 0.0);
    // Work in (H, V) components: logical index 1 is H.
    let t_hv = Vector2::new(t[1], t[0]);
    let h_in = Vector2::new(c64(1.0, 0.0), c64(0.0, 0.0));
    let objective = |x: &[f64]| {
        let out = qwp_jones(x[0]) * hwp_jones(x[1]) * h_in;
        let overlap: C64 = t_hv.dotc(&out);
        1.0 - overlap.norm_sqr()
    };
    let mut best: Option<NmOutcome> = None;
    for q in 0..4 {
        for h in 0..4 {
            let x0 = [
                f64::from(q) * std::f64::consts::FRAC_PI_4,
                f64::from(h) * std::f64::consts::FRAC_PI_8,
            ];
            let out = nelder_mead(
                objective,
                &x0,
                &NmOptions {
                    max_evals: 600,
                    f_tol: 1e-16,
                    step: 0.2,
                },
            );
            if best.as_ref().is_none_or(|b| out.f < b.f) {
                best = Some(out);
            }
        }
    }
    let best = best.expect("at least one start");
    if best.f > 1e-10 {
        return Err(Error::SolverFailure(format!(
            "wave-plate fit stalled at infidelity {:.3e}",
            best.f
        )));
    }
    Ok((best.x[0], best.x[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{OccupancyPattern, PhotonicState};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn mode(spatial: u16, polarization: Polarization, internal: u8) -> ModeLabel {
        ModeLabel {
            spatial,
            polarization,
            internal,
        }
    }

    #[test]
    fn splitter_block_is_orthogonal_rotation() {
        for eta in [0.0, 0.28, 1.0 / 3.0, 0.5, 0.9, 1.0] {
            let b = splitter_block(eta);
            let gram = b.adjoint() * b;
            assert_abs_diff_eq!(gram[(0, 0)].re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(gram[(1, 1)].re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(gram[(0, 1)].norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn hwp_quarter_angle_swaps_h_and_v() {
        let x = hwp_jones(std::f64::consts::FRAC_PI_4);
        assert_abs_diff_eq!((x[(0, 1)] - c64(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((x[(1, 0)] - c64(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[(0, 0)].norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hwp_eighth_angle_maps_h_to_diagonal() {
        let j = hwp_jones(std::f64::consts::FRAC_PI_8);
        let out = j * Vector2::new(c64(1.0, 0.0), c64(0.0, 0.0));
        assert_abs_diff_eq!(out[0].re, FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(out[1].re, FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn qwp_at_zero_retards_v_by_quarter_wave() {
        let j = qwp_jones(0.0);
        assert_abs_diff_eq!((j[(0, 0)] - c64(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((j[(1, 1)] - c64(0.0, 1.0)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j[(0, 1)].norm(), 0.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn hwp_squares_to_identity(theta in -6.3_f64..6.3) {
            let j = hwp_jones(theta);
            let sq = j * j;
            prop_assert!((sq[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-12);
            prop_assert!((sq[(1, 1)] - c64(1.0, 0.0)).norm() < 1e-12);
            prop_assert!(sq[(0, 1)].norm() < 1e-12);
            prop_assert!(sq[(1, 0)].norm() < 1e-12);
        }

        #[test]
        fn lossless_circuits_compile_to_unitaries(
            eta in 0.0_f64..=1.0,
            theta in -3.2_f64..3.2,
            phi in -3.2_f64..3.2,
        ) {
            let mut circuit = Circuit::new(2, 1).unwrap();
            circuit.push(Element::ppbs(0, 1, eta, 1.0 - eta).unwrap()).unwrap();
            circuit.push(Element::hwp(0, theta)).unwrap();
            circuit.push(Element::qwp(1, theta / 2.0)).unwrap();
            circuit.push(Element::phase(1, phi)).unwrap();
            circuit.push(Element::bs(0, 1, 0.5).unwrap()).unwrap();
            let t = circuit.compile().unwrap();
            let m = t.matrix();
            let gram = m.adjoint() * m;
            for i in 0..4 {
                for j in 0..4 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((gram[(i, j)].norm() - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn ppbs_blocks_match_convention() {
        let mut circuit = Circuit::new(2, 1).unwrap();
        circuit
            .push(Element::ppbs(0, 1, 1.0 / 3.0, 1.0).unwrap())
            .unwrap();
        let t = circuit.compile().unwrap();
        let r = (1.0_f64 / 3.0).sqrt();
        let tr = (2.0_f64 / 3.0).sqrt();
        let h0 = mode(0, Polarization::H, 0);
        let h1 = mode(1, Polarization::H, 0);
        let v0 = mode(0, Polarization::V, 0);
        let v1 = mode(1, Polarization::V, 0);
        assert_relative_eq!(t.entry(h0, h0).unwrap().re, r, epsilon = 1e-12);
        assert_relative_eq!(t.entry(h0, h1).unwrap().re, -tr, epsilon = 1e-12);
        assert_relative_eq!(t.entry(h1, h0).unwrap().re, tr, epsilon = 1e-12);
        assert_relative_eq!(t.entry(h1, h1).unwrap().re, r, epsilon = 1e-12);
        // Fully reflective polarization is the identity block.
        assert_relative_eq!(t.entry(v0, v0).unwrap().re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(t.entry(v1, v1).unwrap().re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.entry(v0, v1).unwrap().norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_h_photons_interfere_to_minus_third() {
        let mut circuit = Circuit::new(2, 1).unwrap();
        circuit
            .push(Element::ppbs(0, 1, 1.0 / 3.0, 1.0).unwrap())
            .unwrap();
        let t = circuit.compile().unwrap();
        let input = PhotonicState::single(vec![
            mode(0, Polarization::H, 0),
            mode(1, Polarization::H, 0),
        ])
        .unwrap();
        let out = crate::fock::evolve(&input, &t).unwrap();
        let amp = out.amplitude(&[mode(0, Polarization::H, 0), mode(1, Polarization::H, 0)]);
        assert_relative_eq!(amp.re, -1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(amp.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hom_coincidence_follows_overlap_law() {
        // Two photons on a balanced splitter: coincidence = (1 - V) / 2.
        for k in 0..=10 {
            let overlap = f64::from(k) / 10.0;
            let mut circuit = Circuit::new(2, 2).unwrap();
            circuit.push(Element::bs(0, 1, 0.5).unwrap()).unwrap();
            let t = circuit.compile().unwrap();

            let mut terms = Vec::new();
            for (internal, amp) in internal_amplitudes(overlap, PhotonRole::Partner).unwrap() {
                terms.push((
                    vec![
                        mode(0, Polarization::H, 0),
                        mode(1, Polarization::H, internal),
                    ],
                    c64(amp, 0.0),
                ));
            }
            let input = PhotonicState::new(terms).unwrap();
            let out = crate::fock::evolve(&input, &t).unwrap();
            let coincidence = OccupancyPattern::coincidence(&[0, 1]);
            let p: f64 = out
                .terms()
                .filter(|(occ, _)| coincidence.matches(occ))
                .map(|(_, a)| a.norm_sqr())
                .sum();
            assert_abs_diff_eq!(p, (1.0 - overlap) / 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn compile_rejects_empty_and_out_of_range() {
        let circuit = Circuit::new(2, 1).unwrap();
        assert!(matches!(circuit.compile(), Err(Error::EmptyCircuit)));

        let mut circuit = Circuit::new(2, 1).unwrap();
        let err = circuit.push(Element::hwp(2, 0.1)).unwrap_err();
        assert!(matches!(err, Error::PathOutOfRange { path: 2, .. }));
    }

    #[test]
    fn element_constructors_validate_ranges() {
        assert!(Element::ppbs(0, 1, -0.1, 0.5).is_err());
        assert!(Element::ppbs(0, 1, 0.5, 1.1).is_err());
        assert!(Element::ppbs(0, 0, 0.5, 0.5).is_err());
        assert!(Element::bs(0, 1, f64::NAN).is_err());
        assert!(Element::loss(0, 1.5).is_err());
        assert!(internal_amplitudes(-0.2, PhotonRole::Partner).is_err());
    }

    #[test]
    fn loss_scales_norm_by_transmission() {
        let mut circuit = Circuit::new(2, 1).unwrap();
        circuit.push(Element::loss(1, 0.4).unwrap()).unwrap();
        let t = circuit.compile().unwrap();
        let input = PhotonicState::single(vec![
            mode(1, Polarization::H, 0),
            mode(1, Polarization::V, 0),
        ])
        .unwrap();
        let out = crate::fock::evolve(&input, &t).unwrap();
        assert_relative_eq!(out.norm_sqr(), 0.4 * 0.4, epsilon = 1e-12);
    }

    #[test]
    fn internal_amplitudes_cover_limits() {
        assert_eq!(
            internal_amplitudes(1.0, PhotonRole::Partner).unwrap(),
            vec![(0, 1.0)]
        );
        assert_eq!(
            internal_amplitudes(0.0, PhotonRole::Partner).unwrap(),
            vec![(1, 1.0)]
        );
        assert_eq!(
            internal_amplitudes(0.3, PhotonRole::Reference).unwrap(),
            vec![(0, 1.0)]
        );
        let amps = internal_amplitudes(0.3, PhotonRole::Partner).unwrap();
        let total: f64 = amps.iter().map(|(_, a)| a * a).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn waveplate_fit_reproduces_standard_kets() {
        use crate::qubit::{ket_a, ket_d, ket_h, ket_l, ket_r, ket_v};
        for target in [ket_h(), ket_v(), ket_d(), ket_a(), ket_r(), ket_l()] {
            let (q, h) = fit_waveplate_angles(&target).unwrap();
            let out = qwp_jones(q)
                * hwp_jones(h)
                * Vector2::new(c64(1.0, 0.0), c64(0.0, 0.0));
            // Compare in (H, V) order against the logical-ordered target.
            let t_hv = Vector2::new(target[1], target[0]);
            let fidelity = t_hv.dotc(&out).norm_sqr();
            assert_relative_eq!(fidelity, 1.0, epsilon = 1e-9);
        }
    }
}
