//! Subcommand arguments and their implementations.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use wyner_core::data::{compose_dataset_joint, draw_samples, empirical_joint, DatasetSpec, Split};
use wyner_core::eval::{best_label_accuracy, cluster_predict, cluster_predict_argmax, plane_point, ClusterReport, MatchMode};
use wyner_core::info::{mutual_information, to_bits, JointPmf};
use wyner_core::record::{RunRecord, SolverKind};

use crate::error::{usage, Result};
use crate::io::{encoder_path, read_encoder, read_joint, read_samples, read_text, write_samples, write_text};
use crate::plane;
use crate::solver::{run, SolverOptions};
use crate::sweep::{default_grid, execute, parse_grid, parse_list, worker_count, SweepConfig, SweepSummary};

fn from_file<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read_text(p)?)
            .map_err(|e| crate::error::CliError::Parse { path: p.to_path_buf(), source: e.into() }),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataArgs {
    #[arg(long = "y-card")]
    pub y_card: Option<usize>,
    #[arg(long = "x-card")]
    pub x_card: Option<usize>,
    /// Noise level in [0, 0.5).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long = "n-train")]
    pub n_train: Option<usize>,
    #[arg(long = "n-test")]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with any of these fields; flags override it.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl GenDataArgs {
    pub fn spec(&self) -> Result<(DatasetSpec, PathBuf)> {
        let file: GenDataArgs = from_file(self.config.as_deref())?;
        let d = DatasetSpec::default();
        let spec = DatasetSpec {
            y_card: self.y_card.or(file.y_card).unwrap_or(d.y_card),
            x_card: self.x_card.or(file.x_card).unwrap_or(d.x_card),
            delta: self.delta.or(file.delta).unwrap_or(d.delta),
            block: self.block.or(file.block).unwrap_or(d.block),
            n_train: self.n_train.or(file.n_train).unwrap_or(d.n_train),
            n_test: self.n_test.or(file.n_test).unwrap_or(d.n_test),
            seed: self.seed.or(file.seed).unwrap_or(d.seed),
        };
        spec.validate()?;
        let out = self.out.clone().or(file.out).ok_or_else(|| usage("gen-data needs --out"))?;
        Ok((spec, out))
    }
}

pub struct DatasetFiles {
    pub true_joint: PathBuf,
    pub train_joint: PathBuf,
    pub train_csv: PathBuf,
    pub test_csv: PathBuf,
    pub spec: PathBuf,
}

impl DatasetFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            true_joint: dir.join("joint_true.json"),
            train_joint: dir.join("joint_train.json"),
            train_csv: dir.join("train.csv"),
            test_csv: dir.join("test.csv"),
            spec: dir.join("dataset.json"),
        }
    }
}

fn views_mi_bits(joint: &JointPmf) -> Result<f64> {
    Ok(to_bits(mutual_information(joint, &[0], &[1])?))
}

/// Writes the true and empirical joints, both sample CSVs and `dataset.json`;
/// returns the printed summary.
pub fn gen_data(args: &GenDataArgs) -> Result<String> {
    let (spec, out) = args.spec()?;
    let files = DatasetFiles::in_dir(&out);
    let truth = compose_dataset_joint(&spec)?;
    let train = draw_samples(&spec, Split::Train)?;
    let test = draw_samples(&spec, Split::Test)?;
    let empirical = empirical_joint(&train)?;
    write_text(&files.true_joint, &truth.to_json())?;
    write_text(&files.train_joint, &empirical.to_json())?;
    write_samples(&files.train_csv, &train)?;
    write_samples(&files.test_csv, &test)?;
    write_text(&files.spec, &serde_json::to_string_pretty(&spec).expect("spec serializes"))?;
    Ok(format!(
        "dataset |Y|={} |X|={} block={} delta={} seed={}\n\
         samples: {} train, {} test\n\
         I(X1;X2) true      = {:.6} bits\n\
         I(X1;X2) empirical = {:.6} bits\n\
         wrote {}\n",
        spec.y_card,
        spec.x_card,
        spec.block,
        spec.delta,
        spec.seed,
        spec.n_train,
        spec.n_test,
        views_mi_bits(&truth)?,
        views_mi_bits(&empirical)?,
        out.display()
    ))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveArgs {
    /// variational, admm or baseline.
    #[arg(long)]
    pub solver: Option<String>,
    /// Joint distribution JSON.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: SolverOptions,
    /// Record path; the encoder goes next to it as `<stem>.encoder.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Runs one solve and writes its record and encoder. A run that hits its
/// iteration limit is still a successful command.
pub fn solve(args: &SolveArgs) -> Result<RunRecord> {
    let file: SolveArgs = from_file(args.config.as_deref())?;
    let solver: SolverKind = args.solver.clone().or(file.solver).ok_or_else(|| usage("solve needs --solver"))?.parse()?;
    let joint_path = args.joint.clone().or(file.joint).ok_or_else(|| usage("solve needs --joint"))?;
    let out = args.out.clone().or(file.out).ok_or_else(|| usage("solve needs --out"))?;
    let config = args.options.over(&file.options).config(solver)?;
    let joint = read_joint(&joint_path)?;
    let output = run(&config, &joint)?;
    write_text(&encoder_path(&out), &output.encoder.to_json())?;
    write_text(&out, &output.record.to_json())?;
    Ok(output.record)
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    #[arg(long)]
    pub solver: Option<String>,
    /// Joint JSON; without it the exact circulant joint at --delta is used.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    /// Noise level of the exact circulant joint when no --joint is given.
    #[arg(long)]
    pub delta: Option<f64>,
    /// `geom:LO:HI:N` or `v1,v2,...`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated |Z| values.
    #[arg(long = "z-cards")]
    pub z_cards: Option<String>,
    /// Base seed for the per-run seeds.
    #[arg(long = "base-seed")]
    pub base_seed: Option<u64>,
    /// Worker count; defaults to the processor count.
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub options: SolverOptions,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl SweepArgs {
    pub fn resolve(&self) -> Result<(SweepConfig, JointPmf, PathBuf, usize)> {
        let file: SweepArgs = from_file(self.config.as_deref())?;
        let solver: SolverKind =
            self.solver.clone().or(file.solver).ok_or_else(|| usage("sweep needs --solver"))?.parse()?;
        let options = self.options.over(&file.options);
        if options.seed.is_some() {
            return Err(usage("sweeps derive run seeds from --base-seed; --seed is for single solves"));
        }
        let grid = match self.grid.clone().or(file.grid) {
            Some(g) => parse_grid(&g)?,
            None => default_grid(solver),
        };
        let z_cards = match self.z_cards.clone().or(file.z_cards) {
            Some(z) => parse_list(&z, "|Z|")?,
            None => vec![options.z_card.unwrap_or(8)],
        };
        let config = SweepConfig {
            base: options.config(solver)?,
            grid,
            trials: self.trials.or(file.trials).unwrap_or(10),
            z_cards,
            base_seed: self.base_seed.or(file.base_seed).unwrap_or(0),
        };
        config.validate()?;
        let joint = match self.joint.clone().or(file.joint) {
            Some(p) => read_joint(&p)?,
            None => compose_dataset_joint(&DatasetSpec {
                delta: self.delta.or(file.delta).unwrap_or(0.0),
                ..DatasetSpec::default()
            })?,
        };
        let out = self.out.clone().or(file.out).ok_or_else(|| usage("sweep needs --out"))?;
        let threads = worker_count(self.threads.or(file.threads))?;
        Ok((config, joint, out, threads))
    }
}

pub fn sweep(args: &SweepArgs) -> Result<SweepSummary> {
    let (config, joint, out, threads) = args.resolve()?;
    execute(&config, &joint, &out, threads)
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub encoder: PathBuf,
    /// Test samples CSV (`y,x1,x2`).
    #[arg(long)]
    pub test: PathBuf,
    /// Label alphabet size; defaults to the largest label plus one.
    #[arg(long = "y-card")]
    pub y_card: Option<usize>,
    /// Seed of the hypothesis draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub mode: Mode,
    /// Take the most likely latent instead of sampling (debugging only).
    #[arg(long)]
    pub argmax: bool,
    /// Joint used to attach the encoder's I(X1;X2|Z) to the report.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Exhaustive,
    Assignment,
}

impl From<Mode> for MatchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exhaustive => MatchMode::Exhaustive,
            Mode::Assignment => MatchMode::Assignment,
        }
    }
}

pub fn eval_clustering(args: &EvalArgs) -> Result<ClusterReport> {
    let encoder = read_encoder(&args.encoder)?;
    let test = read_samples(&args.test, args.y_card, encoder.x_cards())?;
    let hypotheses = if args.argmax {
        cluster_predict_argmax(&encoder, &test)?
    } else {
        cluster_predict(&encoder, &test, args.seed)?
    };
    let mut report = best_label_accuracy(&hypotheses, &test.labels, encoder.z_card(), test.y_card, args.mode.into())?;
    if let Some(j) = &args.joint {
        report.residual_cmi = Some(plane_point(&encoder, &read_joint(j)?)?.residual_cmi);
    }
    if let Some(out) = &args.out {
        write_text(out, &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct PlaneArgs {
    /// Record files or directories of records.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn plane(args: &PlaneArgs) -> Result<usize> {
    plane::merge(&args.inputs, &args.out)
}
