//! Report emission: a versioned structured-text report or plot-ready CSV
//! tables, plus the always-written bundle.json and count archive.
//!
//! CSV layout: matrices are row-major with separate `re` and `im` columns
//! and labeled rows/columns (chi bar charts plot `re` over the label
//! pairs); the truth table is one row per input (heatmap rows); the sweep
//! is one row per grid point. Floats use the shortest round-trip
//! representation, so reading a table back loses nothing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bundle::{ResultBundle, RunOutput, M_CORRECTED_FIDELITY, M_PROCESS_FIDELITY};
use crate::config::EmitFormat;
use crate::error::{CliError, Result};

pub fn write_all(dir: &Path, output: &RunOutput, format: EmitFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, &e))?;
    let mut written = Vec::new();

    let bundle_path = dir.join("bundle.json");
    crate::bundle::save(&bundle_path, &output.bundle)?;
    written.push(bundle_path);

    match format {
        EmitFormat::Text => {
            let path = dir.join("report.txt");
            write_file(&path, &text_report(&output.bundle))?;
            written.push(path);
        }
        EmitFormat::Table => {
            for (name, content) in csv_tables(&output.bundle) {
                let path = dir.join(name);
                write_file(&path, &content)?;
                written.push(path);
            }
        }
    }

    if !output.counts.is_empty() {
        let path = dir.join("counts.txt");
        write_file(&path, &counts_text(output))?;
        written.push(path);
    }
    Ok(written)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| CliError::io(path, &e))
}

/// Self-describing text report. The first line carries the format version.
pub fn text_report(bundle: &ResultBundle) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# ppbs report, format {}", bundle.format_version);
    let _ = writeln!(s, "pipeline = {}", bundle.pipeline.name());
    let _ = writeln!(
        s,
        "tool = {} {}",
        bundle.provenance.tool, bundle.provenance.version
    );
    match bundle.provenance.seed {
        Some(seed) => {
            let _ = writeln!(s, "seed = {seed}");
        }
        None => {
            let _ = writeln!(s, "seed = none (deterministic pipeline)");
        }
    }
    let _ = writeln!(s, "timestamp = {}", bundle.provenance.timestamp);

    let _ = writeln!(s, "\n[config]");
    match toml::to_string(&bundle.config) {
        Ok(toml_text) => s.push_str(&toml_text),
        Err(_) => s.push_str("# (config echo unavailable)\n"),
    }

    if !bundle.metrics.is_empty() {
        let _ = writeln!(s, "\n[metrics]");
        let headline = bundle
            .metrics
            .iter()
            .find(|m| m.name == M_CORRECTED_FIDELITY)
            .or_else(|| bundle.metrics.iter().find(|m| m.name == M_PROCESS_FIDELITY));
        if let Some(m) = headline {
            let _ = writeln!(s, "F_P = {:.3}", m.value);
        }
        for m in &bundle.metrics {
            match m.std {
                Some(std) => {
                    let _ = writeln!(s, "{} = {} +- {}", m.name, m.value, std);
                }
                None => {
                    let _ = writeln!(s, "{} = {}", m.name, m.value);
                }
            }
        }
    }

    if let Some(angles) = &bundle.correction_angles {
        let _ = writeln!(s, "\n[correction_angles]");
        let _ = writeln!(
            s,
            "# Euler zyz angles: pre-control, pre-target, post-control, post-target"
        );
        for (chunk, name) in angles.chunks(3).zip(
            ["pre_control", "pre_target", "post_control", "post_target"],
        ) {
            let _ = writeln!(s, "{name} = {}, {}, {}", chunk[0], chunk[1], chunk[2]);
        }
    }

    if let Some(tt) = &bundle.truth_table {
        let _ = writeln!(s, "\n[truth_table]");
        let _ = write!(s, "{:<8}", "input");
        for o in &tt.outcomes {
            let _ = write!(s, "{o:>9}");
        }
        let _ = writeln!(s, "{:>10}", "success");
        for ((input, row), success) in tt.inputs.iter().zip(&tt.rows).zip(&tt.success) {
            let _ = write!(s, "{input:<8}");
            for p in row {
                let _ = write!(s, "{p:>9.4}");
            }
            let _ = writeln!(s, "{success:>10.6}");
        }
    }

    if let Some(sweep) = &bundle.sweep {
        let _ = writeln!(s, "\n[sweep parameter={}]", sweep.parameter);
        let _ = writeln!(s, "{}", sweep.columns.join("\t"));
        for row in &sweep.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", cells.join("\t"));
        }
    }

    for m in &bundle.matrices {
        let _ = writeln!(s, "\n[matrix {} diagonal]", m.name);
        for i in 0..m.dim {
            let k = i * m.dim + i;
            let _ = writeln!(s, "{} = {}", m.labels[i], m.re[k]);
        }
    }
    s
}

/// One (file name, content) pair per table.
pub fn csv_tables(bundle: &ResultBundle) -> Vec<(String, String)> {
    let mut tables = Vec::new();

    if !bundle.metrics.is_empty() {
        let mut s = String::from("name,value,std\n");
        for m in &bundle.metrics {
            let std = m.std.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{}", m.name, m.value, std);
        }
        tables.push(("metrics.csv".into(), s));
    }

    for m in &bundle.matrices {
        let mut s = String::from("row,col,re,im\n");
        for i in 0..m.dim {
            for j in 0..m.dim {
                let k = i * m.dim + j;
                let _ = writeln!(s, "{},{},{},{}", m.labels[i], m.labels[j], m.re[k], m.im[k]);
            }
        }
        tables.push((format!("{}.csv", m.name), s));
    }

    if let Some(tt) = &bundle.truth_table {
        let mut s = format!("input,{},success\n", tt.outcomes.join(","));
        for ((input, row), success) in tt.inputs.iter().zip(&tt.rows).zip(&tt.success) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{},{},{}", input, cells.join(","), success);
        }
        tables.push(("truth_table.csv".into(), s));
    }

    if let Some(sweep) = &bundle.sweep {
        let mut s = sweep.columns.join(",");
        s.push('\n');
        for row in &sweep.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        tables.push(("sweep.csv".into(), s));
    }
    tables
}

/// Line-oriented count archive: one record per line, schema in the header.
pub fn counts_text(output: &RunOutput) -> String {
    let mut s = String::from("# prep setting count total_scale seed\n");
    for c in &output.counts {
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            c.prep, c.setting, c.count, c.total_scale, c.rng_seed
        );
    }
    s
}
