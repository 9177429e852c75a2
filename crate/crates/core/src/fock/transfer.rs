//! Transfer matrices: linear mode maps with explicit input/output labels.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::ModeLabel;
use crate::qubit::C64;

/// Slack allowed on the largest singular value before a matrix is rejected.
const SUB_UNITARY_TOL: f64 = 1e-9;

/// A linear map on mode creation operators.
///
/// Columns are indexed by input modes, rows by output modes. Sub-unitary
/// matrices are allowed (largest singular value at most 1): loss is modelled
/// as amplitude leaking out of the tracked mode set. Modes absent from the
/// maps are genuinely absent; evolving a state that occupies an unlisted
/// mode is an error rather than an implicit identity.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    matrix: DMatrix<C64>,
    input_modes: Vec<ModeLabel>,
    output_modes: Vec<ModeLabel>,
    col_index: BTreeMap<ModeLabel, usize>,
    row_index: BTreeMap<ModeLabel, usize>,
}

impl TransferMatrix {
    /// Wrap a matrix with its mode labels, validating shape, label
    /// uniqueness, and sub-unitarity.
    pub fn new(
        matrix: DMatrix<C64>,
        input_modes: Vec<ModeLabel>,
        output_modes: Vec<ModeLabel>,
    ) -> Result<Self> {
        if matrix.ncols() != input_modes.len() || matrix.nrows() != output_modes.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but labels give {} outputs, {} inputs",
                matrix.nrows(),
                matrix.ncols(),
                output_modes.len(),
                input_modes.len()
            )));
        }
        let col_index = index_map(&input_modes)?;
        let row_index = index_map(&output_modes)?;
        let tm = Self {
            matrix,
            input_modes,
            output_modes,
            col_index,
            row_index,
        };
        let sv = tm.largest_singular_value();
        if sv > 1.0 + SUB_UNITARY_TOL {
            return Err(Error::NotSubUnitary(sv));
        }
        Ok(tm)
    }

    /// Identity map on a mode set.
    pub fn identity(modes: Vec<ModeLabel>) -> Result<Self> {
        let n = modes.len();
        Self::new(DMatrix::identity(n, n), modes.clone(), modes)
    }

    /// `next` applied after `self`; output modes of `self` must coincide
    /// (as a set) with the input modes of `next`.
    pub fn then(&self, next: &TransferMatrix) -> Result<Self> {
        if self.output_modes.len() != next.input_modes.len() {
            return Err(Error::DimensionMismatch(format!(
                "composition: {} outputs vs {} inputs",
                self.output_modes.len(),
                next.input_modes.len()
            )));
        }
        // Column permutation aligning next's inputs with self's outputs.
        let mut aligned = DMatrix::zeros(next.matrix.nrows(), self.output_modes.len());
        for (k, mode) in self.output_modes.iter().enumerate() {
            let j = next
                .col_index
                .get(mode)
                .copied()
                .ok_or_else(|| Error::UnmappedMode(mode.to_string()))?;
            aligned.set_column(k, &next.matrix.column(j));
        }
        Self::new(
            aligned * &self.matrix,
            self.input_modes.clone(),
            next.output_modes.clone(),
        )
    }

    /// Matrix entry addressed by labels; `None` when either label is absent.
    pub fn entry(&self, output: ModeLabel, input: ModeLabel) -> Option<C64> {
        let i = *self.row_index.get(&output)?;
        let j = *self.col_index.get(&input)?;
        Some(self.matrix[(i, j)])
    }

    /// Column position of an input mode.
    pub fn column_of(&self, mode: ModeLabel) -> Option<usize> {
        self.col_index.get(&mode).copied()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn input_modes(&self) -> &[ModeLabel] {
        &self.input_modes
    }

    pub fn output_modes(&self) -> &[ModeLabel] {
        &self.output_modes
    }

    /// Largest singular value, computed from the Gram matrix so complex
    /// entries need only a Hermitian eigensolve.
    pub fn largest_singular_value(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        let eig = nalgebra::linalg::SymmetricEigen::new(gram);
        eig.eigenvalues
            .iter()
            .fold(0.0_f64, |acc, &l| acc.max(l.max(0.0)))
            .sqrt()
    }
}

fn index_map(modes: &[ModeLabel]) -> Result<BTreeMap<ModeLabel, usize>> {
    let mut map = BTreeMap::new();
    for (k, &mode) in modes.iter().enumerate() {
        if map.insert(mode, k).is_some() {
            return Err(Error::DimensionMismatch(format!(
                "duplicate mode label {mode}"
            )));
        }
    }
    Ok(map)
}
