//! The analysis pipelines behind each subcommand.
//!
//! Every pipeline resolves the configured gate or source, runs its
//! simulation or fit, and packs the results into a [`RunOutput`]. All
//! randomness flows from the master seed through the stage streams
//! documented in [`crate::config`], so a bundle is reproducible from its
//! embedded config alone.

use ppbs_core::metrics::{
    average_gate_fidelity, bell_truth_table, linear_entropy, optimize_corrections_with,
    process_fidelity, state_fidelity, tangle, CorrectionOptions,
};
use ppbs_core::tomo::{
    exact_probabilities, monte_carlo_errors, preparations_minimal, reconstruct_process,
    reconstruct_state, reconstruct_state_from_probabilities, reconstruct_state_with,
    settings_overcomplete, simulate_counts, CountRecord, ReconstructOptions,
};
use ppbs_core::{chi_ideal_cz, source_state, ChiMatrix, GateInstance, TwoQubitState};

use crate::bundle::{
    CountLine, MatrixRecord, MetricRecord, Provenance, ResultBundle, RunOutput, SweepRecord,
    TruthTableRecord, FORMAT_VERSION, M_AVERAGE_FIDELITY, M_CHI_II, M_CORRECTED_AVERAGE,
    M_CORRECTED_FIDELITY, M_LINEAR_ENTROPY, M_MEAN_DIAGONAL, M_MEAN_SUCCESS, M_PROCESS_FIDELITY,
    M_PURITY, M_STATE_FIDELITY, M_TANGLE, M_UNCORRECTED_FIDELITY, X_CHI, X_CHI_CORRECTED,
    X_CHI_UNCORRECTED, X_RHO_FIT, X_RHO_TRUE,
};
use crate::config::{
    stage_seed, ExperimentConfig, Pipeline, STAGE_CORRECTION_SEARCH, STAGE_PROCESS_PREP_BASE,
    STAGE_STATE_COUNTS,
};
use crate::error::Result;

/// Preparation labels matching the order of
/// [`ppbs_core::tomo::preparations_minimal`] (control-major over H, V, D, R).
const PREP_LETTERS: [char; 4] = ['H', 'V', 'D', 'R'];

fn prep_label(j: usize) -> String {
    format!("{}{}", PREP_LETTERS[j / 4], PREP_LETTERS[j % 4])
}

pub fn run_pipeline(cfg: &ExperimentConfig, pipeline: Pipeline) -> Result<RunOutput> {
    match pipeline {
        Pipeline::Simulation => run_simulation(cfg),
        Pipeline::StateTomography => run_state_tomography(cfg),
        Pipeline::ProcessTomography => run_process_tomography(cfg),
        Pipeline::BellAnalysis => run_bell_analysis(cfg),
        Pipeline::CorrectionOptimization => run_correction_optimization(cfg),
        Pipeline::Sweep => run_sweep(cfg),
    }
}

fn bundle_for(cfg: &ExperimentConfig, pipeline: Pipeline) -> ResultBundle {
    let mut config = cfg.clone();
    config.pipeline = Some(pipeline);
    ResultBundle {
        format_version: FORMAT_VERSION,
        pipeline,
        provenance: Provenance::current(config.run.seed),
        config,
        metrics: Vec::new(),
        matrices: Vec::new(),
        truth_table: None,
        sweep: None,
        correction_angles: None,
    }
}

/// Gate-quality metrics shared by the simulation and sweep pipelines.
fn gate_metrics(gate: &GateInstance) -> Result<(ChiMatrix, [f64; 4])> {
    let process = gate.process()?;
    let chi = process.chi()?;
    let fp = process_fidelity(&chi, &chi_ideal_cz());
    let avg = average_gate_fidelity(fp)?;
    let success = process.mean_success_probability();
    let chi_ii = chi.entry(0, 0).re;
    Ok((chi, [fp, avg, success, chi_ii]))
}

fn run_simulation(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let gate = cfg.build_gate()?;
    let (chi, [fp, avg, success, chi_ii]) = gate_metrics(&gate)?;
    let table = bell_truth_table(&gate)?;

    let mut bundle = bundle_for(cfg, Pipeline::Simulation);
    bundle.metrics = vec![
        MetricRecord::plain(M_PROCESS_FIDELITY, fp),
        MetricRecord::plain(M_AVERAGE_FIDELITY, avg),
        MetricRecord::plain(M_MEAN_SUCCESS, success),
        MetricRecord::plain(M_CHI_II, chi_ii),
        MetricRecord::plain(M_MEAN_DIAGONAL, table.mean_diagonal()),
    ];
    bundle.matrices = vec![MatrixRecord::from_chi(X_CHI, &chi)];
    bundle.truth_table = Some(TruthTableRecord::from_table(&table));
    Ok(RunOutput {
        bundle,
        counts: Vec::new(),
    })
}

fn run_state_tomography(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let truth = source_state(cfg.source.phi);
    let settings = settings_overcomplete();
    let mut bundle = bundle_for(cfg, Pipeline::StateTomography);
    let mut counts = Vec::new();

    let (fit_state, records) = if cfg.counts.noiseless {
        let probs = exact_probabilities(&truth, &settings);
        let fit =
            reconstruct_state_from_probabilities(&settings, &probs, &Default::default())?;
        (fit.state, Vec::new())
    } else {
        let seed = stage_seed(
            cfg.require_seed(Pipeline::StateTomography)?,
            STAGE_STATE_COUNTS,
        );
        let records = simulate_counts(&truth, &settings, cfg.counts.total_scale, seed)?;
        let fit = reconstruct_state(&records)?;
        (fit.state, records)
    };
    for r in &records {
        counts.push(CountLine {
            prep: "-".into(),
            setting: r.setting.to_string(),
            count: r.count,
            total_scale: r.total_scale,
            rng_seed: r.rng_seed,
        });
    }

    let values = [
        (M_STATE_FIDELITY, state_fidelity(&fit_state, &truth)),
        (M_PURITY, fit_state.purity()),
        (M_TANGLE, tangle(&fit_state)),
        (M_LINEAR_ENTROPY, linear_entropy(&fit_state)),
    ];
    for (name, value) in values {
        let std = bootstrap_std(cfg, &records, &fit_state, &truth, name)?;
        bundle.metrics.push(MetricRecord {
            name: name.into(),
            value,
            std,
        });
    }
    bundle.matrices = vec![
        MatrixRecord::from_state(X_RHO_FIT, &fit_state),
        MatrixRecord::from_state(X_RHO_TRUE, &truth),
    ];
    Ok(RunOutput { bundle, counts })
}

/// Bootstrap error bar for one named state metric, warm-started at the
/// point estimate. Returns None when error bars are disabled or the run
/// was noiseless.
fn bootstrap_std(
    cfg: &ExperimentConfig,
    records: &[CountRecord],
    point: &TwoQubitState,
    truth: &TwoQubitState,
    name: &str,
) -> Result<Option<f64>> {
    if cfg.mc.resamples < 2 || records.is_empty() {
        return Ok(None);
    }
    let warm = *point.matrix();
    let truth = truth.clone();
    let name = name.to_string();
    let est = monte_carlo_errors(records, cfg.mc.resamples, move |resampled| {
        let opts = ReconstructOptions {
            starts: 1,
            warm_start: Some(warm),
            ..Default::default()
        };
        let refit = reconstruct_state_with(resampled, &opts)?;
        Ok(match name.as_str() {
            M_STATE_FIDELITY => state_fidelity(&refit.state, &truth),
            M_PURITY => refit.state.purity(),
            M_TANGLE => tangle(&refit.state),
            _ => linear_entropy(&refit.state),
        })
    })?;
    Ok(Some(est.std))
}

fn run_process_tomography(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let gate = cfg.build_gate()?;
    let process = gate.process()?;
    let preps = preparations_minimal();
    let mut bundle = bundle_for(cfg, Pipeline::ProcessTomography);
    let mut counts = Vec::new();

    let outputs: Vec<TwoQubitState> = if cfg.counts.noiseless {
        preps
            .iter()
            .map(|p| Ok(process.apply(p)?.0))
            .collect::<Result<_>>()?
    } else {
        let master = cfg.require_seed(Pipeline::ProcessTomography)?;
        let settings = settings_overcomplete();
        let mut fitted = Vec::with_capacity(preps.len());
        for (j, prep) in preps.iter().enumerate() {
            let out_state = process.apply(prep)?.0;
            let seed = stage_seed(master, STAGE_PROCESS_PREP_BASE + j as u64);
            let records =
                simulate_counts(&out_state, &settings, cfg.counts.total_scale, seed)?;
            for r in &records {
                counts.push(CountLine {
                    prep: prep_label(j),
                    setting: r.setting.to_string(),
                    count: r.count,
                    total_scale: r.total_scale,
                    rng_seed: r.rng_seed,
                });
            }
            fitted.push(reconstruct_state(&records)?.state);
        }
        fitted
    };

    let fit = reconstruct_process(&preps, &outputs)?;
    let fp = process_fidelity(&fit.chi, &chi_ideal_cz());
    bundle.metrics = vec![
        MetricRecord::plain(M_PROCESS_FIDELITY, fp),
        MetricRecord::plain(M_AVERAGE_FIDELITY, average_gate_fidelity(fp)?),
        MetricRecord::plain(M_MEAN_SUCCESS, process.mean_success_probability()),
        MetricRecord::plain(M_CHI_II, fit.chi.entry(0, 0).re),
    ];
    bundle.matrices = vec![MatrixRecord::from_chi(X_CHI, &fit.chi)];
    Ok(RunOutput { bundle, counts })
}

fn run_bell_analysis(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let gate = cfg.build_gate()?;
    let table = bell_truth_table(&gate)?;

    let mut bundle = bundle_for(cfg, Pipeline::BellAnalysis);
    bundle.metrics = vec![MetricRecord::plain(M_MEAN_DIAGONAL, table.mean_diagonal())];
    for (label, success) in table.labels().iter().zip(table.success()) {
        let name = format!(
            "success_{}",
            label
                .to_string()
                .replace('+', "_plus")
                .replace('-', "_minus")
        );
        bundle.metrics.push(MetricRecord::plain(&name, *success));
    }
    bundle.truth_table = Some(TruthTableRecord::from_table(&table));
    Ok(RunOutput {
        bundle,
        counts: Vec::new(),
    })
}

fn run_correction_optimization(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let gate = cfg.build_gate()?;
    let process = gate.process()?;
    let ideal = chi_ideal_cz();
    let opts = CorrectionOptions {
        seed: cfg
            .run
            .seed
            .map(|s| stage_seed(s, STAGE_CORRECTION_SEARCH))
            .unwrap_or(CorrectionOptions::default().seed),
        ..Default::default()
    };
    let outcome = optimize_corrections_with(&process, &ideal, &opts)?;

    let corrected_process = outcome.correction.apply(&process);
    let chi_uncorrected = process.chi()?;
    let chi_corrected = corrected_process.chi()?;

    let mut bundle = bundle_for(cfg, Pipeline::CorrectionOptimization);
    bundle.metrics = vec![
        MetricRecord::plain(M_UNCORRECTED_FIDELITY, outcome.uncorrected_fidelity),
        MetricRecord::plain(M_CORRECTED_FIDELITY, outcome.fidelity),
        MetricRecord::plain(
            M_CORRECTED_AVERAGE,
            average_gate_fidelity(outcome.fidelity)?,
        ),
        MetricRecord::plain(M_MEAN_SUCCESS, process.mean_success_probability()),
    ];
    bundle.matrices = vec![
        MatrixRecord::from_chi(X_CHI_UNCORRECTED, &chi_uncorrected),
        MatrixRecord::from_chi(X_CHI_CORRECTED, &chi_corrected),
    ];
    bundle.correction_angles = Some(outcome.correction.angles().to_vec());
    Ok(RunOutput {
        bundle,
        counts: Vec::new(),
    })
}

pub const SWEEP_COLUMNS: [&str; 5] = [
    "overlap",
    M_PROCESS_FIDELITY,
    M_AVERAGE_FIDELITY,
    M_CHI_II,
    M_MEAN_SUCCESS,
];

fn run_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let gate = cfg.build_gate()?;
    let values = cfg.sweep.resolved_values()?;
    let mut rows = Vec::with_capacity(values.len());
    for v in values {
        let (_, [fp, avg, success, chi_ii]) = gate_metrics(&gate.with_overlap(v)?)?;
        rows.push(vec![v, fp, avg, chi_ii, success]);
    }

    let mut bundle = bundle_for(cfg, Pipeline::Sweep);
    bundle.sweep = Some(SweepRecord {
        parameter: cfg.sweep.parameter.clone(),
        columns: SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
    });
    Ok(RunOutput {
        bundle,
        counts: Vec::new(),
    })
}
