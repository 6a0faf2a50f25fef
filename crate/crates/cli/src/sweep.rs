//! Parameter sweeps: a grid of multipliers times trials times |Z| values,
//! each run with its own derived seed and its own output files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use wyner_core::info::JointPmf;
use wyner_core::record::{RunRecord, SolverConfig, SolverKind};

use crate::error::{usage, CliError, Result};
use crate::io::{encoder_path, read_record, read_text, write_text};
use crate::plane;
use crate::solver::{run, with_point};

pub const THREADS_ENV: &str = "WYNER_MV_THREADS";

/// `n` points from `lo` to `hi` inclusive with a constant ratio.
pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect(),
    }
}

/// `geom:LO:HI:N` or a comma-separated list of values.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("grid `{s}` is neither `geom:LO:HI:N` nor a comma list"));
    let grid = if let Some(rest) = s.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, n] = parts[..] else { return Err(bad()) };
        let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
        let n: usize = n.parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo) {
            return Err(usage(format!("geometric grid needs 0 < LO <= HI, got {lo}..{hi}")));
        }
        geometric(lo, hi, n)
    } else {
        s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if grid.is_empty() {
        return Err(usage("grid is empty"));
    }
    Ok(grid)
}

pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| usage(format!("bad {what} `{v}` in `{s}`"))))
        .collect()
}

/// The grid used when none is given: `gamma` over `[1, 50]` for the
/// representation-form solvers, `beta = 6` for the variational one.
pub fn default_grid(solver: SolverKind) -> Vec<f64> {
    match solver {
        SolverKind::Variational => vec![6.0],
        SolverKind::Admm | SolverKind::Baseline => geometric(1.0, 50.0, 20),
    }
}

/// Run seed from the base seed and the run's coordinates.
pub fn run_seed(base: u64, solver: SolverKind, z_card: usize, grid_index: usize, trial: usize) -> u64 {
    let key = format!("{base}/{solver}/{z_card}/{grid_index}/{trial}");
    let digest = Sha256::digest(key.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn hash_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Position of a run inside a sweep; also its file name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunId {
    pub solver: SolverKind,
    pub z_card: usize,
    pub grid: usize,
    pub trial: usize,
}

impl fmt::Display for RunId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-z{:02}-g{:02}-t{:02}", self.solver, self.z_card, self.grid, self.trial)
    }
}

impl FromStr for RunId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || usage(format!("`{s}` is not a sweep run name"));
        let parts: Vec<&str> = s.split('-').collect();
        let [solver, z, g, t] = parts[..] else { return Err(bad()) };
        let num = |p: &str, prefix: char| p.strip_prefix(prefix).and_then(|n| n.parse().ok()).ok_or_else(bad);
        Ok(RunId {
            solver: solver.parse().map_err(|_| bad())?,
            z_card: num(z, 'z')?,
            grid: num(g, 'g')?,
            trial: num(t, 't')?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Solver defaults and overrides; multiplier, |Z| and seed are replaced
    /// per run.
    pub base: SolverConfig,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub z_cards: Vec<usize>,
    pub base_seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.z_cards.is_empty() {
            return Err(usage("sweep needs a nonempty grid and at least one |Z|"));
        }
        if self.trials == 0 {
            return Err(usage("sweep needs at least one trial"));
        }
        Ok(())
    }

    /// Every run in merge order: |Z|, then grid point, then trial.
    pub fn plan(&self) -> Vec<(RunId, SolverConfig)> {
        let solver = self.base.kind();
        let mut runs = Vec::new();
        for &z_card in &self.z_cards {
            for (grid, &m) in self.grid.iter().enumerate() {
                for trial in 0..self.trials {
                    let id = RunId { solver, z_card, grid, trial };
                    let seed = run_seed(self.base_seed, solver, z_card, grid, trial);
                    runs.push((id, with_point(&self.base, m, z_card, seed)));
                }
            }
        }
        runs
    }
}

/// Worker count: the requested value (default: all processors), capped by
/// `WYNER_MV_THREADS` when set.
pub fn worker_count(requested: Option<usize>) -> Result<usize> {
    let mut n = requested.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if let Ok(cap) = std::env::var(THREADS_ENV) {
        let cap: usize = cap.trim().parse().map_err(|_| usage(format!("{THREADS_ENV}=`{cap}` is not a count")))?;
        n = n.min(cap);
    }
    Ok(n.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub ran: usize,
    pub skipped: usize,
    pub plane_csv: PathBuf,
    /// Records in merge order.
    pub records: Vec<(String, RunRecord)>,
}

const MANIFEST: &str = "manifest.json";

fn runs_dir(out: &Path) -> PathBuf {
    out.join("runs")
}

pub fn record_path(out: &Path, id: &RunId) -> PathBuf {
    runs_dir(out).join(format!("{id}.json"))
}

fn read_manifest(out: &Path) -> Result<BTreeMap<String, String>> {
    let path = out.join(MANIFEST);
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    serde_json::from_str(&read_text(&path)?)
        .map_err(|e| CliError::Parse { path, source: wyner_core::Error::from(e) })
}

struct Existing {
    text: String,
    record: RunRecord,
}

/// A record already on disk, checked against the manifest hash and the
/// config the sweep would use.
fn existing(out: &Path, id: &RunId, config: &SolverConfig, manifest: &BTreeMap<String, String>) -> Result<Option<Existing>> {
    let path = record_path(out, id);
    if !path.exists() {
        return Ok(None);
    }
    let text = read_text(&path)?;
    if let Some(hash) = manifest.get(&id.to_string()) {
        if *hash != hash_hex(&text) {
            return Err(CliError::Conflict { path, message: "record changed since the sweep wrote it".into() });
        }
    }
    let record = read_record(&path)?;
    if record.config != *config {
        return Err(CliError::Conflict {
            path,
            message: "record was produced with a different config; refusing to overwrite".into(),
        });
    }
    Ok(Some(Existing { text, record }))
}

/// Runs every planned run that has no record yet, then merges all records
/// into `plane.csv` and the manifest. Wall-clock times go to `timing.log`,
/// the only nondeterministic output.
pub fn execute(config: &SweepConfig, joint: &JointPmf, out: &Path, threads: usize) -> Result<SweepSummary> {
    config.validate()?;
    let plan = config.plan();
    let manifest = read_manifest(out)?;
    let mut todo = Vec::new();
    for (id, cfg) in &plan {
        if existing(out, id, cfg, &manifest)?.is_none() {
            todo.push((*id, cfg.clone()));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| usage(format!("cannot start {threads} workers: {e}")))?;
    let timings: Vec<(RunId, f64)> = pool.install(|| {
        todo.par_iter()
            .map(|(id, cfg)| -> Result<(RunId, f64)> {
                let start = Instant::now();
                let output = run(cfg, joint)?;
                let path = record_path(out, id);
                // The record is written last and marks the run as done.
                write_text(&encoder_path(&path), &output.encoder.to_json())?;
                write_text(&path, &output.record.to_json())?;
                Ok((*id, start.elapsed().as_secs_f64()))
            })
            .collect::<Result<_>>()
    })?;

    let mut manifest = BTreeMap::new();
    let mut records = Vec::new();
    for (id, cfg) in &plan {
        let e = existing(out, id, cfg, &BTreeMap::new())?.expect("every planned run has a record");
        manifest.insert(id.to_string(), hash_hex(&e.text));
        records.push((id.to_string(), e.record));
    }
    let manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out.join(MANIFEST), &manifest_text)?;
    let plane_csv = out.join("plane.csv");
    write_text(&plane_csv, &plane::to_csv(&records)?)?;
    if !timings.is_empty() {
        let log: String = timings.iter().map(|(id, s)| format!("{id} {s:.3}\n")).collect();
        let path = out.join("timing.log");
        let previous = if path.exists() { read_text(&path)? } else { String::new() };
        write_text(&path, &(previous + &log))?;
    }
    Ok(SweepSummary { ran: timings.len(), skipped: plan.len() - timings.len(), plane_csv, records })
}
