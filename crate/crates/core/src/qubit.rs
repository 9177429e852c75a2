//! Polarization qubits: kets, Pauli operators, and validated two-qubit states.
//!
//! Logical encoding follows the convention used throughout this crate:
//! logical `0` is vertical polarization `V` and logical `1` is horizontal
//! polarization `H`. Two-qubit kets and matrices are ordered
//! `|00>, |01>, |10>, |11>` with the first (high) bit the control qubit, so
//! the polarization product basis reads `VV, VH, HV, HH` from index 0 to 3.
//!
//! A controlled-Z in this encoding is `diag(1, 1, 1, -1)`: the sign lands on
//! `|11> = |HH>`, which is the component suppressed and sign-flipped by the
//! beamsplitter gate constructions in [`crate::gates`].

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Complex scalar used everywhere in this crate.
pub type C64 = Complex64;

/// Shorthand complex constructor.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Tolerance for Hermiticity / positivity / trace validation of states.
pub const STATE_TOL: f64 = 1e-10;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Logical index of a computational basis ket: `V -> 0`, `H -> 1`.
///
/// Single source of truth for the polarization-to-logical mapping.
#[inline]
pub fn logical_index(horizontal: bool) -> usize {
    if horizontal {
        1
    } else {
        0
    }
}

/// `|H>` in logical components.
pub fn ket_h() -> Vector2<C64> {
    Vector2::new(c64(0.0, 0.0), c64(1.0, 0.0))
}

/// `|V>` in logical components.
pub fn ket_v() -> Vector2<C64> {
    Vector2::new(c64(1.0, 0.0), c64(0.0, 0.0))
}

/// Diagonal `|D> = (|H> + |V>)/sqrt(2)`.
pub fn ket_d() -> Vector2<C64> {
    Vector2::new(c64(FRAC_1_SQRT_2, 0.0), c64(FRAC_1_SQRT_2, 0.0))
}

/// Anti-diagonal `|A> = (|H> - |V>)/sqrt(2)`.
pub fn ket_a() -> Vector2<C64> {
    Vector2::new(c64(-FRAC_1_SQRT_2, 0.0), c64(FRAC_1_SQRT_2, 0.0))
}

/// Right circular `|R> = (|H> - i|V>)/sqrt(2)`.
pub fn ket_r() -> Vector2<C64> {
    Vector2::new(c64(0.0, -FRAC_1_SQRT_2), c64(FRAC_1_SQRT_2, 0.0))
}

/// Left circular `|L> = (|H> + i|V>)/sqrt(2)`.
pub fn ket_l() -> Vector2<C64> {
    Vector2::new(c64(0.0, FRAC_1_SQRT_2), c64(FRAC_1_SQRT_2, 0.0))
}

/// Tensor product of two single-qubit kets, control first.
pub fn kron_ket(a: &Vector2<C64>, b: &Vector2<C64>) -> Vector4<C64> {
    Vector4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
}

/// Tensor product of two single-qubit operators, control first.
pub fn kron_op(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    let mut out = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Single-qubit Pauli operators `[I, X, Y, Z]`.
pub fn paulis() -> [Matrix2<C64>; 4] {
    let o = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    [
        Matrix2::new(one, o, o, one),
        Matrix2::new(o, one, one, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(one, o, o, -one),
    ]
}

/// Two-qubit Pauli basis in the order `{I,X,Y,Z} (x) {I,X,Y,Z}`.
///
/// Index `m = 4*a + b` holds `P_a (x) P_b` with the first factor acting on
/// the control qubit; `II, IZ, ZI, ZZ` sit at indices 0, 3, 12, 15.
pub fn pauli_basis() -> [Matrix4<C64>; 16] {
    let p = paulis();
    std::array::from_fn(|m| kron_op(&p[m / 4], &p[m % 4]))
}

/// Text labels for [`pauli_basis`] in matching order.
pub fn pauli_labels() -> [&'static str; 16] {
    [
        "II", "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY",
        "ZZ",
    ]
}

/// Controlled-Z, `diag(1, 1, 1, -1)` in the logical basis.
pub fn cz() -> Matrix4<C64> {
    Matrix4::from_diagonal(&Vector4::new(
        c64(1.0, 0.0),
        c64(1.0, 0.0),
        c64(1.0, 0.0),
        c64(-1.0, 0.0),
    ))
}

/// Single-qubit Hadamard: maps `|H> -> |D>` and `|V> -> |A>`.
pub fn hadamard() -> Matrix2<C64> {
    let s = c64(FRAC_1_SQRT_2, 0.0);
    // Rows/cols in logical (V, H) order; H -> (H+V)/sqrt2, V -> (H-V)/sqrt2.
    Matrix2::new(-s, s, s, s)
}

/// `Rz(a) Ry(b) Rz(g)` Euler-angle unitary (global phase dropped).
pub fn euler_unitary(alpha: f64, beta: f64, gamma: f64) -> Matrix2<C64> {
    let (cb, sb) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let ep = |t: f64| C64::from_polar(1.0, t);
    // Rz(t) = diag(exp(-it/2), exp(it/2)), Ry(t) = [[cos, -sin], [sin, cos]].
    Matrix2::new(
        ep(-(alpha + gamma) / 2.0) * cb,
        -ep(-(alpha - gamma) / 2.0) * sb,
        ep((alpha - gamma) / 2.0) * sb,
        ep((alpha + gamma) / 2.0) * cb,
    )
}

/// Draw a Haar-like random pure two-qubit ket (normalized complex Gaussians).
pub fn random_pure_ket<R: Rng>(rng: &mut R) -> Vector4<C64> {
    loop {
        let mut v = Vector4::zeros();
        for k in 0..4 {
            v[k] = c64(standard_normal(rng), standard_normal(rng));
        }
        let n = v.norm();
        if n > 1e-6 {
            return v / c64(n, 0.0);
        }
    }
}

pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; avoids log(0) by nudging the uniform sample away from zero.
    let u: f64 = rng.gen::<f64>().max(1e-300);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// A validated two-qubit density matrix in the logical basis.
///
/// Construction enforces Hermiticity, positive semidefiniteness, and unit
/// trace, each to [`STATE_TOL`]. The eigenvalue floor uses the same
/// tolerance, so states produced by well-conditioned arithmetic pass while
/// genuinely unphysical matrices are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4<C64>,
}

impl TwoQubitState {
    /// Validate and wrap a density matrix.
    pub fn new(rho: Matrix4<C64>) -> Result<Self> {
        let herm = (rho - rho.adjoint()).map(|z| z.norm()).max();
        if herm > STATE_TOL {
            return Err(Error::InvalidMatrix {
                kind: "density matrix",
                reason: format!("not Hermitian (max deviation {herm:.3e})"),
            });
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidMatrix {
                kind: "density matrix",
                reason: format!("trace {tr} is not 1"),
            });
        }
        let min_eig = hermitian_eigenvalues(&rho).into_iter().fold(f64::MAX, f64::min);
        if min_eig < -STATE_TOL {
            return Err(Error::InvalidMatrix {
                kind: "density matrix",
                reason: format!("negative eigenvalue {min_eig:.3e}"),
            });
        }
        Ok(Self { rho })
    }

    /// Density matrix of a pure ket (normalizes the ket first).
    pub fn from_pure(psi: &Vector4<C64>) -> Result<Self> {
        let n = psi.norm();
        if n < 1e-12 {
            return Err(Error::ZeroNorm);
        }
        let psi = psi / c64(n, 0.0);
        let rho = &psi * psi.adjoint();
        Ok(Self { rho })
    }

    /// The maximally mixed state `I/4`.
    pub fn maximally_mixed() -> Self {
        Self {
            rho: Matrix4::identity() * c64(0.25, 0.0),
        }
    }

    /// Borrow the underlying matrix.
    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.rho
    }

    /// `Tr[rho^2]`, in `[1/4, 1]` for valid states.
    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Expectation value of a (not necessarily Hermitian) operator.
    pub fn expect(&self, op: &Matrix4<C64>) -> C64 {
        (op * self.rho).trace()
    }

    /// Conjugate by a unitary: `U rho U^dag`.
    pub fn conjugate(&self, u: &Matrix4<C64>) -> Result<Self> {
        Self::new(u * self.rho * u.adjoint())
    }
}

/// Eigenvalues of a Hermitian matrix (real parts, unsorted).
pub fn hermitian_eigenvalues(m: &Matrix4<C64>) -> Vec<f64> {
    let (vals, _) = crate::linalg::jacobi_hermitian4(m);
    vals.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kets_are_normalized_and_orthogonal_in_pairs() {
        for (a, b) in [
            (ket_h(), ket_v()),
            (ket_d(), ket_a()),
            (ket_r(), ket_l()),
        ] {
            assert_relative_eq!(a.norm(), 1.0, max_relative = 1e-12);
            assert_relative_eq!(b.norm(), 1.0, max_relative = 1e-12);
            assert!(a.dotc(&b).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_kets_relate_to_rectilinear() {
        let d = ket_d();
        let expect = (ket_h() + ket_v()) * c64(FRAC_1_SQRT_2, 0.0);
        assert!((d - expect).norm() < 1e-12);
    }

    #[test]
    fn pauli_basis_is_orthogonal_under_hilbert_schmidt() {
        let basis = pauli_basis();
        for (m, pm) in basis.iter().enumerate() {
            for (n, pn) in basis.iter().enumerate() {
                let tr = (pm.adjoint() * pn).trace();
                let expect = if m == n { 4.0 } else { 0.0 };
                assert!((tr - c64(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cz_is_half_sum_of_ii_iz_zi_minus_zz() {
        let basis = pauli_basis();
        let combo = (basis[0] + basis[3] + basis[12] - basis[15]) * c64(0.5, 0.0);
        assert!((combo - cz()).map(|z| z.norm()).max() < 1e-12);
    }

    #[test]
    fn euler_unitary_is_unitary() {
        let u = euler_unitary(0.3, 1.1, -2.5);
        let dev = (u.adjoint() * u - Matrix2::identity()).map(|z| z.norm()).max();
        assert!(dev < 1e-12);
    }

    #[test]
    fn state_validation_rejects_bad_trace_and_negativity() {
        let bad = Matrix4::identity() * c64(0.5, 0.0);
        assert!(TwoQubitState::new(bad).is_err());

        let mut neg = Matrix4::zeros();
        neg[(0, 0)] = c64(1.5, 0.0);
        neg[(1, 1)] = c64(-0.5, 0.0);
        assert!(TwoQubitState::new(neg).is_err());
    }

    #[test]
    fn purity_bounds() {
        let pure = TwoQubitState::from_pure(&kron_ket(&ket_h(), &ket_d())).unwrap();
        assert_relative_eq!(pure.purity(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(TwoQubitState::maximally_mixed().purity(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn hadamard_maps_h_to_d() {
        let out = hadamard() * ket_h();
        assert!((out - ket_d()).norm() < 1e-12);
        let out_v = hadamard() * ket_v();
        assert!((out_v - ket_a()).norm() < 1e-12);
    }
}
