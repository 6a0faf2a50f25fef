//! Plain projected gradient descent on `L_gamma`, for comparison with ADMM.

use serde::{Deserialize, Serialize};

use super::objectives::TwoViewProblem;
use crate::descent::projected_descent;
use crate::error::{usage, Result};
use crate::info::JointPmf;
use crate::model::{ChangeMeasure, Encoder, NegLogSimplex};
use crate::record::{log_residual_slope, RunMetrics, RunOutput, RunRecord, SolverConfig, TrajectoryLog, TRAJECTORY_STRIDE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub gamma: f64,
    pub z_card: usize,
    pub step_size: f64,
    /// Threshold on the norm of one projected step.
    pub tol: f64,
    pub measure: ChangeMeasure,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { gamma: 1.0, z_card: 8, step_size: 1e-2, tol: 2e-6, measure: ChangeMeasure::Probability, max_iters: 300_000, seed: 0 }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(usage(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.step_size > 0.0 && self.tol > 0.0) {
            return Err(usage("step size and tolerance must be positive"));
        }
        if self.z_card == 0 || self.max_iters == 0 {
            return Err(usage("|Z| and the iteration limit must be positive"));
        }
        Ok(())
    }
}

pub fn solve_baseline(joint_x: &JointPmf, config: &BaselineConfig) -> Result<RunOutput> {
    config.validate()?;
    let problem = TwoViewProblem::new(joint_x, config.z_card)?;
    let mut encoder = Encoder::random(config.seed, config.z_card, joint_x.cards())?;
    // Rows without mass have zero gradient and never move.
    let mut x = NegLogSimplex::project(problem.compress(encoder.neglog().values()), config.z_card)?;
    let gamma = config.gamma;
    let mut log = TrajectoryLog::default();
    log.observe(0, problem.lagrangian_value(x.values(), gamma), f64::INFINITY);

    // Chunks of single steps so the trajectory can be sampled at the stride.
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    while iterations < config.max_iters {
        let chunk = TRAJECTORY_STRIDE.min(config.max_iters - iterations);
        let out = projected_descent(&mut x, config.step_size, config.tol, chunk, config.measure, |x, g| {
            problem.lagrangian_grad(x, gamma, g)
        })?;
        iterations += out.iterations;
        residual = out.last_step;
        converged = residual <= config.tol;
        log.observe(iterations, problem.lagrangian_value(x.values(), gamma), residual);
        if converged {
            break;
        }
    }

    let objective = problem.lagrangian_value(x.values(), gamma);
    problem.expand_into(x.values(), encoder.neglog_mut().values_mut());
    let trajectory = log.finish(iterations, objective, residual);
    let coords = crate::eval::plane_point(&encoder, joint_x)?;
    let record = RunRecord {
        config: SolverConfig::Baseline(config.clone()),
        converged,
        iterations,
        metrics: RunMetrics {
            joint_mi: coords.joint_mi,
            sum_view_mi: coords.sum_view_mi,
            residual_cmi: coords.residual_cmi,
            views_mi: coords.views_mi,
            objective,
            achieved_kl: None,
        },
        final_residual: residual,
        decrease: None,
        penalty_threshold: None,
        inner_residuals: None,
        log_residual_slope: if converged { log_residual_slope(&trajectory) } else { None },
        trajectory,
    };
    Ok(RunOutput { record, encoder })
}
