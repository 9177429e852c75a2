//! Two-qubit process representations.
//!
//! A post-selected gate acts as a completely positive, trace-non-increasing
//! map. [`TwoQubitProcess`] stores the map through its action on the
//! matrix units `E_ab = |a><b|`, which is enough to apply it to any input
//! and to convert to the chi-matrix representation
//!
//! ```text
//! eps(rho) = sum_mn chi[m, n] P_m rho P_n
//! ```
//!
//! over the two-qubit Pauli basis `P_{4a + b} = sigma_a (x) sigma_b` with
//! the control factor first and `sigma_0..3 = I, X, Y, Z`. Chi matrices are
//! normalized to unit trace so that post-selection success is carried
//! separately (see [`TwoQubitProcess::mean_success_probability`]).

use nalgebra::{Matrix4, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::qubit::{c64, pauli_basis, pauli_labels, C64, TwoQubitState};

/// 16 x 16 complex matrix in the two-qubit Pauli basis.
pub type Chi16 = SMatrix<C64, 16, 16>;

/// Tolerance for chi-matrix validation (Hermiticity, trace, positivity).
pub const CHI_TOL: f64 = 1e-9;

/// Orthogonal Choi-space vectors `u_m[(4a + i)] = P_m[i, a]`, one per Pauli.
///
/// They satisfy `<u_m | u_n> = 4 delta_mn` and diagonalize the translation
/// between the matrix-unit and chi representations.
pub(crate) fn pauli_vectors() -> [SVector<C64, 16>; 16] {
    let paulis = pauli_basis();
    std::array::from_fn(|m| {
        SVector::<C64, 16>::from_fn(|k, _| {
            let (a, i) = (k / 4, k % 4);
            paulis[m][(i, a)]
        })
    })
}

/// A two-qubit process stored by its action on matrix units.
///
/// `block(a, b)` is the (generally non-Hermitian for `a != b`) matrix
/// `eps(E_ab)`; linearity reconstructs `eps(rho)` for any input. Blocks are
/// unnormalized: the trace of `eps(rho)` is the post-selection success
/// probability for input `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitProcess {
    blocks: [[Matrix4<C64>; 4]; 4],
}

impl TwoQubitProcess {
    /// Build from explicit matrix-unit images, validating consistency
    /// (`eps(E_ba) = eps(E_ab)^dagger`) and positivity of the Choi matrix.
    pub fn from_blocks(blocks: [[Matrix4<C64>; 4]; 4]) -> Result<Self> {
        for a in 0..4 {
            for b in 0..4 {
                let conj = blocks[b][a].adjoint();
                if (blocks[a][b] - conj).norm() > CHI_TOL {
                    return Err(Error::InvalidMatrix {
                        kind: "process",
                        reason: format!("blocks ({a}, {b}) and ({b}, {a}) are not adjoints"),
                    });
                }
            }
        }
        let process = Self { blocks };
        let min = process
            .choi_eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -CHI_TOL {
            return Err(Error::InvalidMatrix {
                kind: "process",
                reason: format!("Choi matrix has negative eigenvalue {min:.3e}"),
            });
        }
        Ok(process)
    }

    /// Process induced by a single (sub-unitary) operator: `rho -> A rho A^dagger`.
    pub fn from_operator(a: &Matrix4<C64>) -> Self {
        let blocks = std::array::from_fn(|p| {
            std::array::from_fn(|q| a.column(p) * a.column(q).adjoint())
        });
        Self { blocks }
    }

    /// Convex mixture of processes with the given non-negative weights.
    pub fn mixture(parts: &[(f64, TwoQubitProcess)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidMatrix {
                kind: "process",
                reason: "mixture of zero processes".into(),
            });
        }
        let mut blocks = [[Matrix4::<C64>::zeros(); 4]; 4];
        for (w, part) in parts {
            if *w < 0.0 {
                return Err(Error::ParamRange {
                    name: "mixture weight",
                    value: *w,
                    low: 0.0,
                    high: f64::INFINITY,
                });
            }
            for a in 0..4 {
                for b in 0..4 {
                    blocks[a][b] += part.blocks[a][b] * c64(*w, 0.0);
                }
            }
        }
        Ok(Self { blocks })
    }

    /// The image of the matrix unit `E_ab`.
    pub fn block(&self, a: usize, b: usize) -> &Matrix4<C64> {
        &self.blocks[a][b]
    }

    /// Apply to a density matrix; the result is unnormalized.
    pub fn apply_raw(&self, rho: &Matrix4<C64>) -> Matrix4<C64> {
        let mut out = Matrix4::<C64>::zeros();
        for a in 0..4 {
            for b in 0..4 {
                out += self.blocks[a][b] * rho[(a, b)];
            }
        }
        out
    }

    /// Apply to a state, renormalizing; returns the output state and the
    /// post-selection success probability.
    pub fn apply(&self, state: &TwoQubitState) -> Result<(TwoQubitState, f64)> {
        let raw = self.apply_raw(state.matrix());
        let p = raw.trace().re;
        if p < 1e-14 {
            return Err(Error::NullPostSelection);
        }
        let normalized = raw / c64(p, 0.0);
        Ok((TwoQubitState::new(normalized)?, p))
    }

    /// Success probability averaged over the computational basis states,
    /// equal to the success probability of the maximally mixed input.
    pub fn mean_success_probability(&self) -> f64 {
        self.trace_sum() / 4.0
    }

    fn trace_sum(&self) -> f64 {
        (0..4).map(|a| self.blocks[a][a].trace().re).sum()
    }

    /// Precede the process with a unitary on the input.
    pub fn compose_pre_unitary(&self, u: &Matrix4<C64>) -> Self {
        let blocks = std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let mut sum = Matrix4::<C64>::zeros();
                for c in 0..4 {
                    for d in 0..4 {
                        let w = u[(c, a)] * u[(d, b)].conj();
                        if w.norm_sqr() > 0.0 {
                            sum += self.blocks[c][d] * w;
                        }
                    }
                }
                sum
            })
        });
        Self { blocks }
    }

    /// Follow the process with a unitary on the output.
    pub fn compose_post_unitary(&self, u: &Matrix4<C64>) -> Self {
        let ud = u.adjoint();
        let blocks =
            std::array::from_fn(|a| std::array::from_fn(|b| u * self.blocks[a][b] * ud));
        Self { blocks }
    }

    /// The Choi matrix `C[(4a + i), (4b + j)] = eps(E_ab)[i, j]`.
    pub fn choi(&self) -> Chi16 {
        Chi16::from_fn(|r, c| {
            let (a, i) = (r / 4, r % 4);
            let (b, j) = (c / 4, c % 4);
            self.blocks[a][b][(i, j)]
        })
    }

    /// Eigenvalues of the (Hermitian) Choi matrix, unsorted.
    pub fn choi_eigenvalues(&self) -> Vec<f64> {
        let choi = self.choi();
        let herm = (choi + choi.adjoint()) * c64(0.5, 0.0);
        nalgebra::SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .collect()
    }

    /// Number of Kraus operators needed, judged from the Choi spectrum.
    pub fn kraus_rank(&self, rel_tol: f64) -> usize {
        let eigs = self.choi_eigenvalues();
        let max = eigs.iter().fold(0.0_f64, |m, &e| m.max(e.abs()));
        if max == 0.0 {
            return 0;
        }
        eigs.iter().filter(|&&e| e > rel_tol * max).count()
    }

    /// Chi matrix before trace normalization. Its trace is
    /// [`Self::mean_success_probability`].
    pub fn chi_unnormalized(&self) -> Chi16 {
        let u = pauli_vectors();
        let choi = self.choi();
        Chi16::from_fn(|m, n| (u[m].adjoint() * choi * u[n])[(0, 0)] / c64(16.0, 0.0))
    }

    /// Trace-normalized chi matrix.
    pub fn chi(&self) -> Result<ChiMatrix> {
        let weight = self.trace_sum() / 4.0;
        if weight < 1e-14 {
            return Err(Error::NullPostSelection);
        }
        ChiMatrix::new(self.chi_unnormalized() / c64(weight, 0.0))
    }
}

/// A validated chi matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    matrix: Chi16,
}

impl ChiMatrix {
    pub fn new(matrix: Chi16) -> Result<Self> {
        let herm_gap = (matrix - matrix.adjoint()).norm();
        if herm_gap > CHI_TOL {
            return Err(Error::InvalidMatrix {
                kind: "chi matrix",
                reason: format!("not Hermitian (gap {herm_gap:.3e})"),
            });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > CHI_TOL || trace.im.abs() > CHI_TOL {
            return Err(Error::InvalidMatrix {
                kind: "chi matrix",
                reason: format!("trace {trace} is not 1"),
            });
        }
        let herm = (matrix + matrix.adjoint()) * c64(0.5, 0.0);
        let min = nalgebra::SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, &e| m.min(e));
        if min < -CHI_TOL {
            return Err(Error::InvalidMatrix {
                kind: "chi matrix",
                reason: format!("negative eigenvalue {min:.3e}"),
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Chi16 {
        &self.matrix
    }

    pub fn entry(&self, m: usize, n: usize) -> C64 {
        self.matrix[(m, n)]
    }

    /// Pauli labels indexing rows and columns, control factor first.
    pub fn labels() -> [&'static str; 16] {
        pauli_labels()
    }
}

/// Chi matrix of the unitary process `rho -> U rho U^dagger`.
pub fn chi_from_unitary(u: &Matrix4<C64>) -> Result<ChiMatrix> {
    TwoQubitProcess::from_operator(u).chi()
}

/// Chi matrix of the ideal controlled-Z gate.
///
/// Supported on the Pauli pairs II, IZ, ZI, ZZ with magnitude-1/4 entries;
/// entries involving ZZ exactly once are negative.
pub fn chi_ideal_cz() -> ChiMatrix {
    chi_from_unitary(&crate::qubit::cz()).expect("ideal CZ chi is well formed")
}
