//! Result bundle: the single JSON artifact every pipeline produces.
//!
//! The bundle embeds the resolved configuration, provenance, all matrices
//! (flattened row-major with separate real and imaginary arrays), scalar
//! metrics with optional bootstrap error bars, and any truth table or sweep
//! table. Serialization is deterministic: identical config and seed give
//! byte-identical files. `verify` recomputes every scalar metric that is
//! derivable from the embedded matrices and checks it to 1e-9.

use std::path::Path;

use nalgebra::Matrix4;
use ppbs_core::process::Chi16;
use ppbs_core::qubit::c64;
use ppbs_core::{ChiMatrix, TwoQubitState, C64};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Pipeline};
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

// Stable metric identifiers.
pub const M_PROCESS_FIDELITY: &str = "process_fidelity";
pub const M_AVERAGE_FIDELITY: &str = "average_gate_fidelity";
pub const M_MEAN_SUCCESS: &str = "mean_success";
pub const M_CHI_II: &str = "chi_ii";
pub const M_STATE_FIDELITY: &str = "state_fidelity_vs_truth";
pub const M_PURITY: &str = "purity";
pub const M_TANGLE: &str = "tangle";
pub const M_LINEAR_ENTROPY: &str = "linear_entropy";
pub const M_MEAN_DIAGONAL: &str = "mean_diagonal";
pub const M_UNCORRECTED_FIDELITY: &str = "uncorrected_process_fidelity";
pub const M_CORRECTED_FIDELITY: &str = "corrected_process_fidelity";
pub const M_CORRECTED_AVERAGE: &str = "corrected_average_fidelity";

// Stable matrix names.
pub const X_CHI: &str = "chi";
pub const X_CHI_UNCORRECTED: &str = "chi_uncorrected";
pub const X_CHI_CORRECTED: &str = "chi_corrected";
pub const X_RHO_FIT: &str = "rho_fit";
pub const X_RHO_TRUE: &str = "rho_true";

/// Basis labels for two-qubit density matrices (logical 0 is V).
pub const STATE_LABELS: [&str; 4] = ["VV", "VH", "HV", "HH"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultBundle {
    pub format_version: u32,
    pub pipeline: Pipeline,
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub metrics: Vec<MetricRecord>,
    pub matrices: Vec<MatrixRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truth_table: Option<TruthTableRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<SweepRecord>,
    /// Euler angles (pre-control, pre-target, post-control, post-target).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub correction_angles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// `unix:<SOURCE_DATE_EPOCH>` when that variable is set, otherwise
    /// "unspecified"; never the wall clock, so reruns stay byte-identical.
    pub timestamp: String,
}

impl Provenance {
    pub fn current(seed: Option<u64>) -> Self {
        let timestamp = match std::env::var("SOURCE_DATE_EPOCH") {
            Ok(epoch) => format!("unix:{epoch}"),
            Err(_) => "unspecified".into(),
        };
        Provenance {
            tool: "ppbs".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRecord {
    pub name: String,
    pub value: f64,
    /// Bootstrap standard deviation, when error bars were requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std: Option<f64>,
}

impl MetricRecord {
    pub fn plain(name: &str, value: f64) -> Self {
        MetricRecord {
            name: name.into(),
            value,
            std: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub name: String,
    pub dim: usize,
    /// Basis labels, one per row/column.
    pub labels: Vec<String>,
    /// Row-major real parts.
    pub re: Vec<f64>,
    /// Row-major imaginary parts.
    pub im: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_chi(name: &str, chi: &ChiMatrix) -> Self {
        let m = chi.matrix();
        let labels = ChiMatrix::labels().iter().map(|s| s.to_string()).collect();
        let mut re = Vec::with_capacity(256);
        let mut im = Vec::with_capacity(256);
        for i in 0..16 {
            for j in 0..16 {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixRecord {
            name: name.into(),
            dim: 16,
            labels,
            re,
            im,
        }
    }

    pub fn from_state(name: &str, state: &TwoQubitState) -> Self {
        let m = state.matrix();
        let mut re = Vec::with_capacity(16);
        let mut im = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixRecord {
            name: name.into(),
            dim: 4,
            labels: STATE_LABELS.iter().map(|s| s.to_string()).collect(),
            re,
            im,
        }
    }

    fn check_len(&self) -> Result<()> {
        let n = self.dim * self.dim;
        if self.re.len() != n || self.im.len() != n {
            return Err(CliError::Domain(format!(
                "matrix {} has {} re / {} im entries, expected {n}",
                self.name,
                self.re.len(),
                self.im.len()
            )));
        }
        Ok(())
    }

    pub fn to_chi(&self) -> Result<ChiMatrix> {
        if self.dim != 16 {
            return Err(CliError::Domain(format!(
                "matrix {} has dim {}, expected 16",
                self.name, self.dim
            )));
        }
        self.check_len()?;
        let m = Chi16::from_fn(|i, j| c64(self.re[16 * i + j], self.im[16 * i + j]));
        Ok(ChiMatrix::new(m)?)
    }

    pub fn to_state(&self) -> Result<TwoQubitState> {
        if self.dim != 4 {
            return Err(CliError::Domain(format!(
                "matrix {} has dim {}, expected 4",
                self.name, self.dim
            )));
        }
        self.check_len()?;
        let m = Matrix4::<C64>::from_fn(|i, j| c64(self.re[4 * i + j], self.im[4 * i + j]));
        Ok(TwoQubitState::new(m)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthTableRecord {
    /// Input state labels, in row order.
    pub inputs: Vec<String>,
    /// Outcome labels, in column order.
    pub outcomes: Vec<String>,
    /// rows[i][j] = probability of outcome j given input i (post-selected).
    pub rows: Vec<Vec<f64>>,
    /// Coincidence success probability per input.
    pub success: Vec<f64>,
}

impl TruthTableRecord {
    pub fn from_table(table: &ppbs_core::metrics::TruthTable) -> Self {
        TruthTableRecord {
            inputs: table.labels().iter().map(|l| l.to_string()).collect(),
            outcomes: ppbs_core::BellOutcome::ALL
                .iter()
                .map(|o| o.to_string())
                .collect(),
            rows: table.rows().iter().map(|r| r.to_vec()).collect(),
            success: table.success().to_vec(),
        }
    }

    pub fn mean_diagonal(&self) -> Result<f64> {
        let n = self.rows.len();
        if n == 0 || self.rows.iter().any(|r| r.len() != n) {
            return Err(CliError::Domain("truth table is not square".into()));
        }
        Ok(self.rows.iter().enumerate().map(|(i, r)| r[i]).sum::<f64>() / n as f64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub parameter: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// One archived count record; serialized line-oriented into counts.txt.
#[derive(Debug, Clone)]
pub struct CountLine {
    /// Preparation label, "-" for source tomography.
    pub prep: String,
    pub setting: String,
    pub count: u64,
    pub total_scale: f64,
    pub rng_seed: u64,
}

/// Everything one pipeline run produces.
pub struct RunOutput {
    pub bundle: ResultBundle,
    pub counts: Vec<CountLine>,
}

pub fn save(path: &Path, bundle: &ResultBundle) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(bundle).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, &e))
}

pub fn load(path: &Path) -> Result<ResultBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, &e))?;
    let bundle: ResultBundle = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid bundle {}: {e}", path.display())))?;
    if bundle.format_version != FORMAT_VERSION {
        return Err(CliError::Config(format!(
            "bundle format version {} unsupported (expected {FORMAT_VERSION})",
            bundle.format_version
        )));
    }
    Ok(bundle)
}

/// One verification line: metric name, stored value, recomputed value.
pub struct VerifyCheck {
    pub name: String,
    pub stored: f64,
    pub recomputed: Option<f64>,
}

const VERIFY_TOL: f64 = 1e-9;

/// Recompute every scalar metric derivable from the embedded matrices.
///
/// Returns the per-metric checks; errors if any recomputed value differs
/// from its stored counterpart by more than 1e-9.
pub fn verify(bundle: &ResultBundle) -> Result<Vec<VerifyCheck>> {
    let matrix = |name: &str| bundle.matrices.iter().find(|m| m.name == name);
    let chi_of = |name: &str| -> Result<Option<ChiMatrix>> {
        matrix(name).map(|m| m.to_chi()).transpose()
    };
    let ideal = ppbs_core::chi_ideal_cz();

    let chi = chi_of(X_CHI)?;
    let chi_uncorrected = chi_of(X_CHI_UNCORRECTED)?;
    let chi_corrected = chi_of(X_CHI_CORRECTED)?;
    let rho_fit = matrix(X_RHO_FIT).map(|m| m.to_state()).transpose()?;
    let rho_true = matrix(X_RHO_TRUE).map(|m| m.to_state()).transpose()?;

    let fp = |c: &Option<ChiMatrix>| {
        c.as_ref()
            .map(|c| ppbs_core::metrics::process_fidelity(c, &ideal))
    };

    let mut checks = Vec::new();
    let mut failures = Vec::new();
    for metric in &bundle.metrics {
        let recomputed: Option<f64> = match metric.name.as_str() {
            M_PROCESS_FIDELITY => fp(&chi),
            M_AVERAGE_FIDELITY => match fp(&chi) {
                Some(f) => Some(ppbs_core::metrics::average_gate_fidelity(f)?),
                None => None,
            },
            M_CHI_II => chi.as_ref().map(|c| c.entry(0, 0).re),
            M_UNCORRECTED_FIDELITY => fp(&chi_uncorrected),
            M_CORRECTED_FIDELITY => fp(&chi_corrected),
            M_CORRECTED_AVERAGE => match fp(&chi_corrected) {
                Some(f) => Some(ppbs_core::metrics::average_gate_fidelity(f)?),
                None => None,
            },
            M_STATE_FIDELITY => match (&rho_fit, &rho_true) {
                (Some(a), Some(b)) => Some(ppbs_core::metrics::state_fidelity(a, b)),
                _ => None,
            },
            M_PURITY => rho_fit.as_ref().map(|s| s.purity()),
            M_TANGLE => rho_fit.as_ref().map(ppbs_core::metrics::tangle),
            M_LINEAR_ENTROPY => rho_fit.as_ref().map(ppbs_core::metrics::linear_entropy),
            M_MEAN_DIAGONAL => match &bundle.truth_table {
                Some(tt) => Some(tt.mean_diagonal()?),
                None => None,
            },
            _ => None,
        };
        if let Some(r) = recomputed {
            if (r - metric.value).abs() > VERIFY_TOL {
                failures.push(format!(
                    "{}: stored {} but recomputed {}",
                    metric.name, metric.value, r
                ));
            }
        }
        checks.push(VerifyCheck {
            name: metric.name.clone(),
            stored: metric.value,
            recomputed,
        });
    }
    if !failures.is_empty() {
        return Err(CliError::Domain(format!(
            "bundle fails verification: {}",
            failures.join("; ")
        )));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn bundles_round_trip_bit_exactly() {
        let cfg = ExperimentConfig::default();
        let output = crate::pipelines::run_pipeline(&cfg, Pipeline::Simulation).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        save(&a, &output.bundle).unwrap();
        let loaded = load(&a).unwrap();
        save(&b, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&a).unwrap(),
            std::fs::read(&b).unwrap(),
            "serialize -> parse -> serialize must be the identity"
        );
    }

    #[test]
    fn fresh_bundles_verify_cleanly() {
        let cfg = ExperimentConfig::default();
        let output = crate::pipelines::run_pipeline(&cfg, Pipeline::Simulation).unwrap();
        let checks = verify(&output.bundle).unwrap();
        let recomputed = checks.iter().filter(|c| c.recomputed.is_some()).count();
        assert!(recomputed >= 3, "expected several recomputable metrics");
    }
}
