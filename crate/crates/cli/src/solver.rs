//! Flag-level solver options and dispatch to the core solvers.

use clap::Args;
use serde::{Deserialize, Serialize};
use wyner_core::info::JointPmf;
use wyner_core::record::{RunOutput, SolverConfig, SolverKind};
use wyner_core::representation::{solve_admm, solve_baseline, AdmmConfig, BaselineConfig};
use wyner_core::variational::{solve_variational, VariationalConfig};

use crate::error::{usage, Result};

/// Overrides on top of each solver's defaults. The same fields are read from
/// a JSON config file; flags win over file values.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Multiplier for the ADMM and baseline solvers.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Multiplier for the variational solver.
    #[arg(long)]
    pub beta: Option<f64>,
    /// ADMM penalty coefficient.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long = "z-card")]
    pub z_card: Option<usize>,
    /// Termination threshold: `|p - q|^2` for ADMM, step norm for the
    /// baseline, per-cycle change for the variational solver.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SolverOptions {
    /// Fields set here replace those of `base`.
    pub fn over(&self, base: &SolverOptions) -> SolverOptions {
        SolverOptions {
            gamma: self.gamma.or(base.gamma),
            beta: self.beta.or(base.beta),
            c: self.c.or(base.c),
            step: self.step.or(base.step),
            z_card: self.z_card.or(base.z_card),
            tol: self.tol.or(base.tol),
            max_iters: self.max_iters.or(base.max_iters),
            seed: self.seed.or(base.seed),
        }
    }

    pub fn config(&self, kind: SolverKind) -> Result<SolverConfig> {
        let config = match kind {
            SolverKind::Admm => {
                if self.beta.is_some() {
                    return Err(usage("--beta applies to the variational solver; use --gamma"));
                }
                let d = AdmmConfig::default();
                SolverConfig::Admm(AdmmConfig {
                    gamma: self.gamma.unwrap_or(d.gamma),
                    c: self.c.unwrap_or(d.c),
                    z_card: self.z_card.unwrap_or(d.z_card),
                    step_size: self.step.unwrap_or(d.step_size),
                    primal_tol: self.tol.unwrap_or(d.primal_tol),
                    max_iters: self.max_iters.unwrap_or(d.max_iters),
                    seed: self.seed.unwrap_or(d.seed),
                    ..d
                })
            }
            SolverKind::Baseline => {
                if self.beta.is_some() || self.c.is_some() {
                    return Err(usage("the baseline takes --gamma only"));
                }
                let d = BaselineConfig::default();
                SolverConfig::Baseline(BaselineConfig {
                    gamma: self.gamma.unwrap_or(d.gamma),
                    z_card: self.z_card.unwrap_or(d.z_card),
                    step_size: self.step.unwrap_or(d.step_size),
                    tol: self.tol.unwrap_or(d.tol),
                    max_iters: self.max_iters.unwrap_or(d.max_iters),
                    seed: self.seed.unwrap_or(d.seed),
                    ..d
                })
            }
            SolverKind::Variational => {
                if self.gamma.is_some() || self.c.is_some() {
                    return Err(usage("the variational solver takes --beta, not --gamma or --c"));
                }
                let d = VariationalConfig::default();
                SolverConfig::Variational(VariationalConfig {
                    beta: self.beta.unwrap_or(d.beta),
                    z_card: self.z_card.unwrap_or(d.z_card),
                    step_size: self.step.unwrap_or(d.step_size),
                    outer_tol: self.tol.unwrap_or(d.outer_tol),
                    outer_max_iters: self.max_iters.unwrap_or(d.outer_max_iters),
                    seed: self.seed.unwrap_or(d.seed),
                    ..d
                })
            }
        };
        Ok(config)
    }
}

pub fn run(config: &SolverConfig, joint: &JointPmf) -> Result<RunOutput> {
    Ok(match config {
        SolverConfig::Admm(c) => solve_admm(joint, c)?,
        SolverConfig::Baseline(c) => solve_baseline(joint, c)?,
        SolverConfig::Variational(c) => solve_variational(joint, c)?.into_output(),
    })
}

/// Replaces the swept multiplier, z-card and seed of a config.
pub fn with_point(config: &SolverConfig, multiplier: f64, z_card: usize, seed: u64) -> SolverConfig {
    match config {
        SolverConfig::Admm(c) => SolverConfig::Admm(AdmmConfig { gamma: multiplier, z_card, seed, ..c.clone() }),
        SolverConfig::Baseline(c) => {
            SolverConfig::Baseline(BaselineConfig { gamma: multiplier, z_card, seed, ..c.clone() })
        }
        SolverConfig::Variational(c) => {
            SolverConfig::Variational(VariationalConfig { beta: multiplier, z_card, seed, ..c.clone() })
        }
    }
}
