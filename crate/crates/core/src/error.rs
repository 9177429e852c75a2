//! Error type shared by the simulation, tomography, and metrics layers.

use thiserror::Error;

/// Library-wide error enumeration.
///
/// Domain errors (bad parameters, unphysical matrices, impossible requests)
/// are kept distinct from the one *expected* failure mode of a post-selected
/// experiment: every amplitude missing the detection pattern. Callers that
/// scan parameter regimes should match on [`Error::NullPostSelection`]
/// instead of treating it as a bug.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter fell outside its physical range.
    #[error("parameter {name} = {value} outside [{low}, {high}]")]
    ParamRange {
        name: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    /// A state referenced an optical mode the transfer matrix does not map.
    #[error("mode {0} is not mapped by the transfer matrix")]
    UnmappedMode(String),

    /// Two objects that must share a mode set or dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A transfer matrix would amplify some input (singular value > 1).
    #[error("transfer matrix is not physical: largest singular value {0} > 1")]
    NotSubUnitary(f64),

    /// Post-selection removed every term of the state.
    #[error("post-selection pattern matched no surviving amplitude")]
    NullPostSelection,

    /// A state that must be a two-path coincidence contains other terms.
    #[error("state contains non-coincidence terms ({0}); post-select before reducing to qubits")]
    NotCoincident(String),

    /// An element was added outside the circuit's declared path range.
    #[error("element touches path {path} but the circuit has {path_count} paths")]
    PathOutOfRange { path: usize, path_count: usize },

    /// A circuit with no elements cannot be compiled.
    #[error("cannot compile an empty circuit")]
    EmptyCircuit,

    /// A matrix failed a physicality check (Hermiticity, positivity, trace).
    #[error("invalid {kind}: {reason}")]
    InvalidMatrix { kind: &'static str, reason: String },

    /// A state with zero norm cannot be used or normalized.
    #[error("state has zero norm")]
    ZeroNorm,

    /// The photon number is outside the supported range.
    #[error("photon number {0} unsupported (expected 1..=4)")]
    PhotonNumber(usize),

    /// A measurement or preparation set does not span the reconstruction space.
    #[error("measurement/preparation set is rank-deficient: rank {rank} < {needed}")]
    RankDeficient { rank: usize, needed: usize },

    /// Input data carries no usable information (e.g. all counts zero).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// An iterative solver failed to produce a usable result.
    #[error("solver failed: {0}")]
    SolverFailure(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
