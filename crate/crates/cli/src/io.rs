//! File formats: JSON joints, encoders and records, CSV sample sets.

use std::fs;
use std::path::{Path, PathBuf};

use wyner_core::data::SampleSet;
use wyner_core::info::JointPmf;
use wyner_core::model::Encoder;
use wyner_core::record::RunRecord;

use crate::error::{usage, CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Writes `text`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn parsed<T>(path: &Path, r: wyner_core::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Parse { path: path.to_path_buf(), source })
}

pub fn read_joint(path: &Path) -> Result<JointPmf> {
    parsed(path, JointPmf::from_json(&read_text(path)?))
}

pub fn read_encoder(path: &Path) -> Result<Encoder> {
    parsed(path, Encoder::from_json(&read_text(path)?))
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    parsed(path, RunRecord::from_json(&read_text(path)?))
}

/// `<stem>.encoder.json` next to a record file.
pub fn encoder_path(record: &Path) -> PathBuf {
    let stem = record.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    record.with_file_name(format!("{stem}.encoder.json"))
}

/// CSV with header `y,x1,...,xV`, one row per sample.
pub fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["y".to_string()];
    header.extend((1..=samples.views.len()).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for n in 0..samples.len() {
        let mut row = vec![samples.labels[n].to_string()];
        row.extend(samples.views.iter().map(|v| v[n].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| usage(format!("csv buffer: {e}")))?;
    write_text(path, &String::from_utf8(bytes).expect("csv of integers is utf-8"))
}

/// Reads a sample CSV. View alphabet sizes come from the caller since the
/// file only holds symbols; the label alphabet defaults to the largest label
/// plus one.
pub fn read_samples(path: &Path, y_card: Option<usize>, x_cards: &[usize]) -> Result<SampleSet> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    let expect: Vec<String> =
        std::iter::once("y".to_string()).chain((1..=x_cards.len()).map(|i| format!("x{i}"))).collect();
    if header.iter().ne(expect.iter().map(String::as_str)) {
        return Err(usage(format!("{}: header must be `{}`", path.display(), expect.join(","))));
    }
    let mut labels = Vec::new();
    let mut views = vec![Vec::new(); x_cards.len()];
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let mut fields = row.iter().map(|f| {
            f.trim().parse::<usize>().map_err(|_| {
                usage(format!("{}: row {} has non-integer field `{f}`", path.display(), line + 2))
            })
        });
        labels.push(fields.next().expect("header checked")?);
        for v in &mut views {
            v.push(fields.next().expect("header checked")?);
        }
    }
    let y_card = y_card.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let samples = SampleSet { y_card, x_cards: x_cards.to_vec(), labels, views };
    samples.validate().map_err(|source| CliError::Parse { path: path.to_path_buf(), source })?;
    Ok(samples)
}
