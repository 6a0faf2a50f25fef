//! Information-plane CSV: one row per run record.

use std::path::{Path, PathBuf};

use wyner_core::eval::wyner_line;
use wyner_core::record::RunRecord;

use crate::error::{usage, CliError, Result};
use crate::io::{read_record, write_text};
use crate::sweep::RunId;

pub const COLUMNS: [&str; 16] = [
    "run",
    "solver",
    "z_card",
    "multiplier",
    "trial",
    "seed",
    "converged",
    "iterations",
    "sum_view_mi",
    "joint_mi",
    "residual_cmi",
    "views_mi",
    "wyner_line",
    "objective",
    "achieved_kl",
    "final_residual",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(run: &str, r: &RunRecord) -> Vec<String> {
    let m = &r.metrics;
    let trial = run.parse::<RunId>().map(|id| id.trial.to_string()).unwrap_or_default();
    vec![
        run.to_string(),
        r.solver().to_string(),
        r.config.z_card().to_string(),
        full(r.config.multiplier()),
        trial,
        r.config.seed().to_string(),
        r.converged.to_string(),
        r.iterations.to_string(),
        full(m.sum_view_mi),
        full(m.joint_mi),
        full(m.residual_cmi),
        full(m.views_mi),
        full(wyner_line(m.sum_view_mi, m.views_mi)),
        full(m.objective),
        m.achieved_kl.map(full).unwrap_or_default(),
        full(r.final_residual),
    ]
}

/// Renders `(run name, record)` pairs in the order given.
pub fn to_csv(records: &[(String, RunRecord)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| usage(format!("csv: {e}"));
    w.write_record(COLUMNS).map_err(err)?;
    for (run, r) in records {
        w.write_record(row(run, r)).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| usage(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv fields are utf-8"))
}

/// Record files (`*.json` but not `*.encoder.json`) under `dir`, by name.
pub fn record_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".json") && !name.ends_with(".encoder.json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads every record in the given directories or files into one CSV.
pub fn merge(inputs: &[PathBuf], out: &Path) -> Result<usize> {
    let mut records = Vec::new();
    for input in inputs {
        let files = if input.is_dir() { record_files(input)? } else { vec![input.clone()] };
        for f in files {
            let run = f.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
            records.push((run, read_record(&f)?));
        }
    }
    write_text(out, &to_csv(&records)?)?;
    Ok(records.len())
}
