//! Experiment configuration: TOML file plus command-line overrides.
//!
//! Flags always win over the file; the file wins over built-in defaults.
//! The fully resolved configuration is echoed into every result bundle, so
//! a bundle alone is enough to rerun its experiment.
//!
//! Seed discipline: a run carries one master seed (`[run] seed`). Each
//! stochastic stage derives its own stream as
//! `stage_seed = master ^ (stage_index * 0x9E37_79B9_7F4A_7C15)` with
//! stage indices
//!
//! * 1: source-state tomography counts,
//! * 2 + j: process-tomography counts for preparation j (j = 0..15),
//! * 17: correction-search restart stream.
//!
//! Bootstrap resampling derives further streams from the count records
//! themselves (see the core tomography module), so error bars are
//! reproducible from archived counts alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

const SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derive the deterministic sub-stream seed for one pipeline stage.
pub fn stage_seed(master: u64, stage: u64) -> u64 {
    master ^ stage.wrapping_mul(SEED_MIX)
}

pub const STAGE_STATE_COUNTS: u64 = 1;
pub const STAGE_PROCESS_PREP_BASE: u64 = 2;
pub const STAGE_CORRECTION_SEARCH: u64 = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Simulation,
    StateTomography,
    ProcessTomography,
    BellAnalysis,
    CorrectionOptimization,
    Sweep,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Simulation => "simulation",
            Pipeline::StateTomography => "state_tomography",
            Pipeline::ProcessTomography => "process_tomography",
            Pipeline::BellAnalysis => "bell_analysis",
            Pipeline::CorrectionOptimization => "correction_optimization",
            Pipeline::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EmitFormat {
    /// Human-readable structured report (report.txt).
    Text,
    /// Plot-ready CSV tables (one file per matrix or table).
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Three partially polarizing splitters on two spatial paths.
    Ppbs,
    /// Polarizing-splitter interferometer with one partial splitter.
    Interferometric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Informational; the subcommand decides what actually runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<Pipeline>,
    pub gate: GateConfig,
    pub source: SourceConfig,
    pub counts: CountsConfig,
    pub mc: McConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub run: RunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            pipeline: None,
            gate: GateConfig::default(),
            source: SourceConfig::default(),
            counts: CountsConfig::default(),
            mc: McConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
            run: RunConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateConfig {
    pub architecture: Architecture,
    /// One value (shared by all splitters) or three values.
    pub eta: Vec<f64>,
    /// Photon wave-packet overlap V in [0, 1].
    pub overlap: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            architecture: Architecture::Ppbs,
            eta: vec![1.0 / 3.0],
            overlap: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    /// Relative phase of the |HH> + e^{i phi} |VV> source state.
    pub phi: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig { phi: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountsConfig {
    /// Mean number of events per measurement setting.
    pub total_scale: f64,
    /// Skip count sampling and fit exact probabilities instead.
    pub noiseless: bool,
}

impl Default for CountsConfig {
    fn default() -> Self {
        CountsConfig {
            total_scale: 1e5,
            noiseless: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Bootstrap resamples per scalar metric; 0 disables error bars.
    pub resamples: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { resamples: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Only "overlap" is supported.
    pub parameter: String,
    /// Explicit grid; wins over start/stop/steps when non-empty.
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            parameter: "overlap".into(),
            values: Vec::new(),
            start: None,
            stop: None,
            steps: None,
        }
    }
}

impl SweepConfig {
    /// The grid to sweep; an empty grid is valid and yields a header-only
    /// table.
    pub fn resolved_values(&self) -> Result<Vec<f64>> {
        if !self.values.is_empty() {
            return Ok(self.values.clone());
        }
        match (self.start, self.stop, self.steps) {
            (None, None, None) => Ok(Vec::new()),
            (Some(start), Some(stop), Some(steps)) => {
                if steps == 0 {
                    return Ok(Vec::new());
                }
                if steps == 1 {
                    return Ok(vec![start]);
                }
                let span = stop - start;
                Ok((0..steps)
                    .map(|k| start + span * k as f64 / (steps - 1) as f64)
                    .collect())
            }
            _ => Err(CliError::Config(
                "sweep grid needs either values or all of start, stop, steps".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: EmitFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("ppbs-out"),
            format: EmitFormat::Text,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; required for any pipeline that samples counts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Free-form label echoed into the bundle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Command-line overrides shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct Overrides {
    /// TOML experiment configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for stochastic pipelines.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (bundle.json plus report or tables).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum, value_name = "FORMAT")]
    pub format: Option<EmitFormat>,
    /// Mean events per measurement setting.
    #[arg(long, global = true, value_name = "N")]
    pub counts: Option<f64>,
    /// Splitter reflectivities "E1,E2,E3" (a single value is shared).
    #[arg(long, global = true, value_delimiter = ',', value_name = "E1,E2,E3")]
    pub eta: Option<Vec<f64>>,
    /// Photon wave-packet overlap V in [0, 1].
    #[arg(long, global = true, value_name = "V")]
    pub overlap: Option<f64>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
    Ok(cfg)
}

pub fn resolve(overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &overrides.config {
        Some(path) => load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = overrides.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(out) = &overrides.out {
        cfg.output.dir = out.clone();
    }
    if let Some(format) = overrides.format {
        cfg.output.format = format;
    }
    if let Some(counts) = overrides.counts {
        cfg.counts.total_scale = counts;
    }
    if let Some(eta) = &overrides.eta {
        cfg.gate.eta = eta.clone();
    }
    if let Some(overlap) = overrides.overlap {
        cfg.gate.overlap = overlap;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.version != CONFIG_VERSION {
        return Err(CliError::Config(format!(
            "config version {} unsupported (expected {CONFIG_VERSION})",
            cfg.version
        )));
    }
    if !matches!(cfg.gate.eta.len(), 1 | 3) {
        return Err(CliError::Config(format!(
            "gate.eta needs one or three values, got {}",
            cfg.gate.eta.len()
        )));
    }
    if cfg.sweep.parameter != "overlap" {
        return Err(CliError::Config(format!(
            "unsupported sweep parameter {:?} (only \"overlap\")",
            cfg.sweep.parameter
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn etas(&self) -> [f64; 3] {
        match self.gate.eta.as_slice() {
            [e] => [*e; 3],
            [a, b, c] => [*a, *b, *c],
            _ => unreachable!("validated at resolve time"),
        }
    }

    /// Build the configured gate instance.
    pub fn build_gate(&self) -> Result<ppbs_core::GateInstance> {
        let [e1, e2, e3] = self.etas();
        match self.gate.architecture {
            Architecture::Ppbs => {
                Ok(ppbs_core::build_ppbs_cz(e1, e2, e3, self.gate.overlap)?)
            }
            Architecture::Interferometric => {
                if e1 != e2 || e2 != e3 {
                    return Err(CliError::Config(
                        "the interferometric architecture has a single splitter; \
                         give one eta value"
                            .into(),
                    ));
                }
                Ok(ppbs_core::build_interferometric_cz(e1, self.gate.overlap)?)
            }
        }
    }

    /// Whether this pipeline draws random counts under the current config.
    pub fn is_stochastic(&self, pipeline: Pipeline) -> bool {
        matches!(
            pipeline,
            Pipeline::StateTomography | Pipeline::ProcessTomography
        ) && !self.counts.noiseless
    }

    pub fn require_seed(&self, pipeline: Pipeline) -> Result<u64> {
        self.run.seed.ok_or_else(|| {
            CliError::Config(format!(
                "pipeline {} samples counts and needs a seed; pass --seed or set [run] seed",
                pipeline.name()
            ))
        })
    }
}
