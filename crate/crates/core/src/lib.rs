//! Simulation and analysis toolkit for a two-photon polarization-encoded
//! controlled-Z gate built from partially polarizing beamsplitters.
//!
//! The crate is layered bottom-up:
//!
//! * [`fock`]: few-photon states over labeled modes and their evolution
//!   through (sub-)unitary transfer matrices;
//! * [`optics`]: physical elements (splitters, wave plates, loss) and
//!   circuits that compile to transfer matrices;
//! * [`gates`]: the post-selected controlled-Z constructions and Bell-state
//!   analysis built on them;
//! * [`process`]: two-qubit process representations and chi matrices;
//! * [`tomo`]: simulated count records and maximum-likelihood state and
//!   process reconstruction;
//! * [`metrics`]: fidelities, entanglement measures, truth tables, and
//!   local-correction search;
//! * [`opt`]: the deterministic optimizers backing the fits.
//!
//! Logical convention: qubit value 0 is vertical polarization, 1 is
//! horizontal; two-qubit basis order is `|00>, |01>, |10>, |11>` with the
//! control qubit first. The splitter sign convention is documented in
//! [`optics`].

pub mod error;
pub mod fock;
pub mod gates;
mod linalg;
pub mod metrics;
pub mod opt;
pub mod optics;
pub mod process;
pub mod qubit;
pub mod tomo;

pub use error::{Error, Result};
pub use fock::{ModeLabel, OccupancyPattern, PhotonicState, Polarization, TransferMatrix};
pub use gates::{
    analyze_bell, bell_inputs, build_interferometric_cz, build_ppbs_cz, source_state,
    BellAnalysis, BellInput, BellLabel, BellOutcome, GateArchitecture, GateInstance,
};
pub use optics::{Circuit, Element};
pub use process::{chi_from_unitary, chi_ideal_cz, ChiMatrix, TwoQubitProcess};
pub use qubit::{C64, TwoQubitState};
