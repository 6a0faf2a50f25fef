//! Solver II: ADMM on `F(p) + G(q)` subject to `p = q`.

use serde::{Deserialize, Serialize};

use super::convexity::{ConvexityConstants, DecreaseMonitor};
use super::objectives::TwoViewProblem;
use crate::descent::{projected_descent, sq_dist, InnerOutcome};
use crate::error::{usage, Result};
use crate::info::JointPmf;
use crate::model::{ChangeMeasure, Encoder, NegLogSimplex};
use crate::record::{log_residual_slope, InnerResiduals, RunOutput, RunRecord, SolverConfig, TrajectoryLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    pub gamma: f64,
    pub c: f64,
    pub z_card: usize,
    pub step_size: f64,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Threshold on `|p - q|^2`.
    pub primal_tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            c: 128.0,
            z_card: 8,
            step_size: 1e-2,
            inner_tol: 1e-8,
            inner_max_iters: 100,
            primal_tol: 2e-6,
            max_iters: 300_000,
            seed: 0,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(usage(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(usage(format!("penalty c must be positive, got {}", self.c)));
        }
        if !(self.step_size > 0.0 && self.inner_tol > 0.0 && self.primal_tol > 0.0) {
            return Err(usage("step size and tolerances must be positive"));
        }
        if self.z_card == 0 || self.inner_max_iters == 0 || self.max_iters == 0 {
            return Err(usage("|Z| and iteration limits must be positive"));
        }
        Ok(())
    }
}

/// Collective ADMM point `(p, nu, q)` after `k` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub p: Encoder,
    pub nu: Vec<f64>,
    pub q: Encoder,
    pub k: usize,
}

impl AdmmState {
    /// Zero dual, iteration count zero.
    pub fn new(p: Encoder, q: Encoder) -> Self {
        let nu = vec![0.0; p.neglog().values().len()];
        Self { p, nu, q, k: 0 }
    }

    /// `p = q` drawn from `seed`.
    pub fn init(joint_x: &JointPmf, z_card: usize, seed: u64) -> Result<Self> {
        let e = Encoder::random(seed, z_card, joint_x.cards())?;
        Ok(Self::new(e.clone(), e))
    }

    pub fn primal_residual(&self) -> f64 {
        sq_dist(self.p.neglog().values(), self.q.neglog().values())
    }
}

/// `<nu, p - q> + (c/2) |p - q|^2`.
pub(crate) fn coupling(p: &[f64], q: &[f64], nu: &[f64], c: f64) -> f64 {
    p.iter()
        .zip(q)
        .zip(nu)
        .map(|((a, b), n)| {
            let d = a - b;
            n * d + 0.5 * c * d * d
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepReport {
    pub dp_sq: f64,
    pub dq_sq: f64,
    pub inner_p: InnerOutcome,
    pub inner_q: InnerOutcome,
}

/// `(p, nu, q)` restricted to the rows of a problem.
#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub p: NegLogSimplex,
    pub nu: Vec<f64>,
    pub q: NegLogSimplex,
}

impl Iterate {
    fn from_state(problem: &TwoViewProblem, state: &AdmmState) -> Result<Self> {
        let zc = problem.z_card();
        Ok(Self {
            p: NegLogSimplex::project(problem.compress(state.p.neglog().values()), zc)?,
            nu: problem.compress(&state.nu),
            q: NegLogSimplex::project(problem.compress(state.q.neglog().values()), zc)?,
        })
    }

    fn write_back(&self, problem: &TwoViewProblem, state: &mut AdmmState) {
        problem.expand_into(self.p.values(), state.p.neglog_mut().values_mut());
        problem.expand_into(self.q.values(), state.q.neglog_mut().values_mut());
        problem.expand_into(&self.nu, &mut state.nu);
    }

    fn residual(&self) -> f64 {
        sq_dist(self.p.values(), self.q.values())
    }

    fn augmented_value(&self, problem: &TwoViewProblem, gamma: f64, c: f64) -> f64 {
        let (p, q) = (self.p.values(), self.q.values());
        problem.f_value(p, gamma) + problem.g_value(q, gamma) + coupling(p, q, &self.nu, c)
    }
}

pub(crate) fn step_in_place(
    problem: &TwoViewProblem,
    it: &mut Iterate,
    gamma: f64,
    c: f64,
    config: &AdmmConfig,
) -> Result<StepReport> {
    let p_old = it.p.values().to_vec();
    let q_old = it.q.values().to_vec();

    let nu = &it.nu;
    let inner_p = projected_descent(&mut it.p, config.step_size, config.inner_tol, config.inner_max_iters, ChangeMeasure::Neglog, |x, g| {
        problem.f_grad(x, gamma, g);
        for i in 0..g.len() {
            g[i] += nu[i] + c * (x[i] - q_old[i]);
        }
    })?;

    let p_new = it.p.values();
    for i in 0..it.nu.len() {
        it.nu[i] += c * (p_new[i] - q_old[i]);
    }

    let (p_new, nu) = (it.p.values(), &it.nu);
    let inner_q = projected_descent(&mut it.q, config.step_size, config.inner_tol, config.inner_max_iters, ChangeMeasure::Neglog, |x, g| {
        problem.g_grad(x, gamma, g);
        for i in 0..g.len() {
            g[i] += -nu[i] + c * (x[i] - p_new[i]);
        }
    })?;
    Ok(StepReport {
        dp_sq: sq_dist(&p_old, it.p.values()),
        dq_sq: sq_dist(&q_old, it.q.values()),
        inner_p,
        inner_q,
    })
}

fn check_state(problem: &TwoViewProblem, state: &AdmmState) -> Result<()> {
    problem.check_dim(state.p.neglog().values())?;
    problem.check_dim(state.q.neglog().values())?;
    problem.check_dim(&state.nu)?;
    if state.p.z_card() != problem.z_card() || state.q.z_card() != problem.z_card() {
        return Err(usage("state and problem disagree on |Z|"));
    }
    Ok(())
}

/// Rows without mass see only the coupling terms, so once `p = q` and
/// `nu = 0` there they never move and the solver can drop them.
fn problem_for(joint_x: &JointPmf, state: &AdmmState) -> Result<TwoViewProblem> {
    let dense = TwoViewProblem::dense(joint_x, state.p.z_card())?;
    check_state(&dense, state)?;
    let zc = state.p.z_card();
    let (p, q) = (state.p.neglog().values(), state.q.neglog().values());
    let at_rest = joint_x.mass().iter().enumerate().filter(|(_, &m)| m == 0.0).all(|(row, _)| {
        let r = row * zc..(row + 1) * zc;
        p[r.clone()] == q[r.clone()] && state.nu[r].iter().all(|&n| n == 0.0)
    });
    if at_rest {
        TwoViewProblem::new(joint_x, zc)
    } else {
        Ok(dense)
    }
}

/// One iteration: approximate p-minimization, exact dual ascent
/// `nu += c (p_new - q)`, approximate q-minimization.
pub fn admm_step(state: &AdmmState, joint_x: &JointPmf, gamma: f64, c: f64, config: &AdmmConfig) -> Result<AdmmState> {
    let problem = problem_for(joint_x, state)?;
    let mut it = Iterate::from_state(&problem, state)?;
    step_in_place(&problem, &mut it, gamma, c, config)?;
    let mut next = state.clone();
    it.write_back(&problem, &mut next);
    next.k += 1;
    Ok(next)
}

/// Runs ADMM from a seeded random encoder until `|p - q|^2 <= primal_tol` or
/// `max_iters`. The reported encoder is `q`.
pub fn solve_admm(joint_x: &JointPmf, config: &AdmmConfig) -> Result<RunOutput> {
    config.validate()?;
    let state = AdmmState::init(joint_x, config.z_card, config.seed)?;
    solve_admm_from(joint_x, config, state)
}

pub(crate) fn solve_admm_from(joint_x: &JointPmf, config: &AdmmConfig, mut state: AdmmState) -> Result<RunOutput> {
    let problem = problem_for(joint_x, &state)?;
    let (gamma, c) = (config.gamma, config.c);
    let constants = ConvexityConstants::from_clipping(problem.max_cell_mass(), gamma);
    let mut monitor = DecreaseMonitor::new(constants.delta_p(c), constants.delta_q(c));
    let mut log = TrajectoryLog::default();

    let mut it = Iterate::from_state(&problem, &state)?;
    let mut value = it.augmented_value(&problem, gamma, c);
    let mut residual = it.residual();
    log.observe(state.k, value, residual);
    let mut converged = false;
    let mut last = None;
    while state.k < config.max_iters {
        let report = step_in_place(&problem, &mut it, gamma, c, config)?;
        state.k += 1;
        let next = it.augmented_value(&problem, gamma, c);
        monitor.push(value, next, report.dp_sq, report.dq_sq);
        value = next;
        residual = it.residual();
        log.observe(state.k, value, residual);
        last = Some(report);
        if residual <= config.primal_tol {
            converged = true;
            break;
        }
    }
    it.write_back(&problem, &mut state);

    let trajectory = log.finish(state.k, value, residual);
    let objective = problem.lagrangian_value(it.q.values(), gamma);
    let encoder = state.q;
    let coords = crate::eval::plane_point(&encoder, joint_x)?;
    let record = RunRecord {
        config: SolverConfig::Admm(config.clone()),
        converged,
        iterations: state.k,
        metrics: crate::record::RunMetrics {
            joint_mi: coords.joint_mi,
            sum_view_mi: coords.sum_view_mi,
            residual_cmi: coords.residual_cmi,
            views_mi: coords.views_mi,
            objective,
            achieved_kl: None,
        },
        final_residual: residual,
        decrease: Some(monitor.report()),
        penalty_threshold: Some(constants.c_threshold),
        inner_residuals: last.map(|r| InnerResiduals { p: r.inner_p.last_step, q: r.inner_q.last_step }),
        log_residual_slope: if converged { log_residual_slope(&trajectory) } else { None },
        trajectory,
    };
    Ok(RunOutput { record, encoder })
}
