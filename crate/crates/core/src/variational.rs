//! Solver I: block alternating minimization of the variational Lagrangian
//! over per-view decoders `P(X_i | Z)` with a uniform prior.
//!
//! The Lagrangian is the surrogate `-sum_i H(X_i|Z) - E_theta[ln P(X^V)]`
//! plus `beta * D_KL[P(X^V) || P_theta(X^V)]`. Decoders live in negative-log
//! coordinates; every block update is projected gradient descent whose steps
//! are halved until the Lagrangian does not increase.

use serde::{Deserialize, Serialize};

use crate::descent::l2;
use crate::error::{usage, Error, Result};
use crate::info::{JointPmf, PROB_FLOOR};
use crate::model::{pull_back, ChangeMeasure, DecoderSet, Encoder, NegLogSimplex};
use crate::record::{log_residual_slope, RunMetrics, RunOutput, RunRecord, SolverConfig, TrajectoryLog};

/// Step halvings tried before an inner loop gives up on a block.
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationalConfig {
    pub beta: f64,
    pub z_card: usize,
    pub step_size: f64,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Threshold on the per-view change of the decoders in one cycle.
    pub outer_tol: f64,
    pub outer_measure: ChangeMeasure,
    pub outer_max_iters: usize,
    /// Largest `D_KL[P || P_theta]`, in nats, for a run to count as feasible.
    pub xi_filter: f64,
    pub seed: u64,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            beta: 6.0,
            z_card: 8,
            step_size: 1e-2,
            inner_tol: 1e-8,
            inner_max_iters: 500,
            outer_tol: 2e-6,
            outer_measure: ChangeMeasure::Probability,
            outer_max_iters: 100_000,
            xi_filter: 0.1,
            seed: 0,
        }
    }
}

impl VariationalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(usage(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.step_size > 0.0 && self.inner_tol > 0.0 && self.outer_tol > 0.0) {
            return Err(usage("step size and tolerances must be positive"));
        }
        if self.z_card == 0 || self.inner_max_iters == 0 || self.outer_max_iters == 0 {
            return Err(usage("|Z| and iteration limits must be positive"));
        }
        Ok(())
    }
}

/// Data terms for a fixed joint: masses, floored logs and per-cell view indices.
#[derive(Debug, Clone)]
pub(crate) struct VariationalProblem {
    cards: Vec<usize>,
    z_card: usize,
    px: Vec<f64>,
    log_px: Vec<f64>,
    /// `obs[x * V + i]` is the view-`i` symbol of flat cell `x`.
    obs: Vec<usize>,
}

impl VariationalProblem {
    pub fn new(joint_x: &JointPmf, z_card: usize) -> Result<Self> {
        let cards = joint_x.cards().to_vec();
        let v = cards.len();
        let n = joint_x.len();
        let mut obs = vec![0; n * v];
        for x in 0..n {
            let mut rest = x;
            for i in (0..v).rev() {
                obs[x * v + i] = rest % cards[i];
                rest /= cards[i];
            }
        }
        let px = joint_x.mass().to_vec();
        let log_px = px.iter().map(|&p| p.max(PROB_FLOOR).ln()).collect();
        Ok(Self { cards, z_card, px, log_px, obs })
    }

    fn check(&self, theta: &DecoderSet) -> Result<()> {
        if theta.x_cards() != self.cards || theta.z_card() != self.z_card {
            return Err(usage(format!(
                "decoders over |Z|={} and {:?} used on |Z|={} and {:?}",
                theta.z_card(),
                theta.x_cards(),
                self.z_card,
                self.cards
            )));
        }
        Ok(())
    }

    fn num_views(&self) -> usize {
        self.cards.len()
    }

    /// `prod[z * n + x] = prod_i w_i[z, x_i]` and `P_theta(x)`.
    fn mixture(&self, prior: &[f64], views: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
        let (v, n, zc) = (self.num_views(), self.px.len(), self.z_card);
        let mut prod = vec![0.0; zc * n];
        let mut ptheta = vec![0.0; n];
        for z in 0..zc {
            for x in 0..n {
                let mut s = 0.0;
                for (i, view) in views.iter().enumerate() {
                    s += view[z * self.cards[i] + self.obs[x * v + i]];
                }
                let m = (-s).exp();
                prod[z * n + x] = m;
                ptheta[x] += prior[z] * m;
            }
        }
        (prod, ptheta)
    }

    fn value(&self, prior: &[f64], views: &[&[f64]], beta: f64) -> f64 {
        let (_, ptheta) = self.mixture(prior, views);
        let mut value = 0.0;
        for (i, view) in views.iter().enumerate() {
            let xc = self.cards[i];
            for z in 0..self.z_card {
                let h: f64 = view[z * xc..(z + 1) * xc].iter().map(|&r| (-r).exp() * r).sum();
                value -= prior[z] * h;
            }
        }
        for x in 0..self.px.len() {
            value -= ptheta[x] * self.log_px[x];
            if beta != 0.0 && self.px[x] > 0.0 {
                value += beta * self.px[x] * (self.px[x] / ptheta[x]).ln();
            }
        }
        value
    }

    fn grad(&self, prior: &[f64], views: &[&[f64]], i: usize, beta: f64, out: &mut [f64]) {
        let (v, n, zc, xc) = (self.num_views(), self.px.len(), self.z_card, self.cards[i]);
        let (prod, ptheta) = self.mixture(prior, views);
        let coef: Vec<f64> = (0..n)
            .map(|x| {
                let kl = if self.px[x] > 0.0 { beta * self.px[x] / ptheta[x] } else { 0.0 };
                self.log_px[x] + kl
            })
            .collect();
        for z in 0..zc {
            let row = &mut out[z * xc..(z + 1) * xc];
            for (a, g) in row.iter_mut().enumerate() {
                let r = views[i][z * xc + a];
                *g = (-r).exp() * (r - 1.0);
            }
            for x in 0..n {
                row[self.obs[x * v + i]] += prod[z * n + x] * coef[x];
            }
            row.iter_mut().for_each(|g| *g *= prior[z]);
        }
    }

    fn ptheta(&self, theta: &DecoderSet) -> Vec<f64> {
        let views: Vec<&[f64]> = (0..self.num_views()).map(|i| theta.view(i).values()).collect();
        self.mixture(theta.prior_z().mass(), &views).1
    }

    fn kl(&self, theta: &DecoderSet) -> f64 {
        let ptheta = self.ptheta(theta);
        self.px.iter().zip(&ptheta).filter(|(&p, _)| p > 0.0).map(|(&p, &q)| p * (p / q).ln()).sum::<f64>().max(0.0)
    }

    /// `P_theta(z | x)` in negative-log coordinates.
    fn induced_encoder(&self, theta: &DecoderSet) -> Result<Encoder> {
        let views: Vec<&[f64]> = (0..self.num_views()).map(|i| theta.view(i).values()).collect();
        let prior = theta.prior_z().mass();
        let (prod, ptheta) = self.mixture(prior, &views);
        let (n, zc) = (self.px.len(), self.z_card);
        let mut neglog = vec![0.0; n * zc];
        for x in 0..n {
            for z in 0..zc {
                let post = prior[z] * prod[z * n + x] / ptheta[x];
                neglog[x * zc + z] = if post > 0.0 { -post.ln() } else { f64::MAX };
            }
        }
        Encoder::from_neglog(zc, self.cards.clone(), neglog)
    }
}

fn view_slices(theta: &DecoderSet) -> Vec<&[f64]> {
    (0..theta.num_views()).map(|i| theta.view(i).values()).collect()
}

/// `-sum_i H_theta(X_i|Z) - E_theta[ln P(X^V)]`, in nats. Cells where
/// `P(X^V)` vanishes contribute with `ln P` floored at `ln 1e-12`.
pub fn surrogate_bound(theta: &DecoderSet, joint_x: &JointPmf) -> Result<f64> {
    variational_lagrangian(theta, joint_x, 0.0)
}

/// Surrogate plus `beta * D_KL[P(X^V) || P_theta(X^V)]`, in nats.
pub fn variational_lagrangian(theta: &DecoderSet, joint_x: &JointPmf, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(usage(format!("beta must be nonnegative, got {beta}")));
    }
    let problem = VariationalProblem::new(joint_x, theta.z_card())?;
    problem.check(theta)?;
    Ok(problem.value(theta.prior_z().mass(), &view_slices(theta), beta))
}

/// Analytic gradient of [`variational_lagrangian`] with respect to the
/// negative-log values of view `i`, treating them as free coordinates.
pub fn variational_gradient(theta: &DecoderSet, joint_x: &JointPmf, beta: f64, i: usize) -> Result<Vec<f64>> {
    let problem = VariationalProblem::new(joint_x, theta.z_card())?;
    problem.check(theta)?;
    if i >= theta.num_views() {
        return Err(usage(format!("view {i} out of {}", theta.num_views())));
    }
    let mut out = vec![0.0; theta.view(i).values().len()];
    problem.grad(theta.prior_z().mass(), &view_slices(theta), i, beta, &mut out);
    Ok(out)
}

/// Same quantities with the decoders given as raw (unprojected) values.
pub fn variational_value_raw(joint_x: &JointPmf, z_card: usize, views: &[&[f64]], beta: f64) -> Result<f64> {
    let problem = VariationalProblem::new(joint_x, z_card)?;
    let prior = vec![1.0 / z_card as f64; z_card];
    Ok(problem.value(&prior, views, beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOutcome {
    pub iterations: usize,
    pub last_step: f64,
    pub before: f64,
    pub after: f64,
}

fn block_update_in_place(
    problem: &VariationalProblem,
    theta: &mut DecoderSet,
    i: usize,
    config: &VariationalConfig,
) -> Result<BlockOutcome> {
    let beta = config.beta;
    let prior = theta.prior_z().mass().to_vec();
    let mut views: Vec<Vec<f64>> = (0..theta.num_views()).map(|j| theta.view(j).values().to_vec()).collect();
    let card = theta.view(i).card();
    let eval = |views: &[Vec<f64>]| {
        let s: Vec<&[f64]> = views.iter().map(Vec::as_slice).collect();
        problem.value(&prior, &s, beta)
    };
    let before = eval(&views);
    let mut current = before;
    let mut g = vec![0.0; views[i].len()];
    let mut last_step = 0.0;
    let mut iterations = 0;
    for it in 0..config.inner_max_iters {
        {
            let s: Vec<&[f64]> = views.iter().map(Vec::as_slice).collect();
            problem.grad(&prior, &s, i, beta, &mut g);
        }
        if let Some(c) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { index: it, message: format!("non-finite gradient in coordinate {c}") });
        }
        let base = views[i].clone();
        pull_back(&base, card, &mut g);
        let mut step = config.step_size;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = base.iter().zip(&g).map(|(v, d)| v - step * d).collect();
            views[i] = NegLogSimplex::project(trial, card)?.values().to_vec();
            let value = eval(&views);
            if value <= current {
                current = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations = it + 1;
        if !accepted {
            views[i] = base;
            last_step = 0.0;
            break;
        }
        last_step = l2(&views[i], &base);
        if last_step <= config.inner_tol {
            break;
        }
    }
    theta.view_mut(i).set_values(&views[i])?;
    Ok(BlockOutcome { iterations, last_step, before, after: current })
}

/// Descent on the decoder of view `i` with the others held fixed.
pub fn block_update(theta: &DecoderSet, i: usize, joint_x: &JointPmf, config: &VariationalConfig) -> Result<DecoderSet> {
    let problem = VariationalProblem::new(joint_x, theta.z_card())?;
    problem.check(theta)?;
    if i >= theta.num_views() {
        return Err(usage(format!("view {i} out of {}", theta.num_views())));
    }
    let mut next = theta.clone();
    block_update_in_place(&problem, &mut next, i, config)?;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalRun {
    pub decoders: DecoderSet,
    /// Lagrangian after each outer cycle, starting with the initial value.
    pub objectives: Vec<f64>,
    /// Lagrangian before and after every block update, in update order.
    pub block_values: Vec<(f64, f64)>,
    pub achieved_kl: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Whether `achieved_kl <= xi_filter`.
    pub feasible: bool,
    pub record: RunRecord,
    /// Induced encoder `P_theta(Z | X^V)`.
    pub encoder: Encoder,
}

impl VariationalRun {
    pub fn into_output(self) -> RunOutput {
        RunOutput { record: self.record, encoder: self.encoder }
    }

    /// Largest increase of the Lagrangian across a single block update.
    pub fn max_block_increase(&self) -> f64 {
        self.block_values.iter().map(|(b, a)| a - b).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cycles block updates over the views until every view moves by at most
/// `outer_tol` in one cycle, or `outer_max_iters` cycles.
pub fn solve_variational(joint_x: &JointPmf, config: &VariationalConfig) -> Result<VariationalRun> {
    config.validate()?;
    if joint_x.num_axes() < 2 {
        return Err(usage("the variational solver needs at least two views"));
    }
    let problem = VariationalProblem::new(joint_x, config.z_card)?;
    let mut theta = DecoderSet::random(config.seed, config.z_card, joint_x.cards())?;
    let v = theta.num_views();
    let mut objectives = vec![problem.value(theta.prior_z().mass(), &view_slices(&theta), config.beta)];
    let mut block_values = Vec::new();
    let mut log = TrajectoryLog::default();
    log.observe(0, objectives[0], f64::INFINITY);
    let mut converged = false;
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < config.outer_max_iters {
        change = 0.0;
        for i in 0..v {
            let before = theta.view(i).values().to_vec();
            let out = block_update_in_place(&problem, &mut theta, i, config)?;
            block_values.push((out.before, out.after));
            change = f64::max(change, config.outer_measure.distance(&before, theta.view(i).values()));
        }
        iterations += 1;
        let value = problem.value(theta.prior_z().mass(), &view_slices(&theta), config.beta);
        objectives.push(value);
        log.observe(iterations, value, change);
        if change <= config.outer_tol {
            converged = true;
            break;
        }
    }

    let objective = *objectives.last().expect("initial value");
    let trajectory = log.finish(iterations, objective, change);
    let achieved_kl = problem.kl(&theta);
    let encoder = problem.induced_encoder(&theta)?;
    let coords = crate::eval::plane_point(&encoder, joint_x)?;
    let record = RunRecord {
        config: SolverConfig::Variational(config.clone()),
        converged,
        iterations,
        metrics: RunMetrics {
            joint_mi: coords.joint_mi,
            sum_view_mi: coords.sum_view_mi,
            residual_cmi: coords.residual_cmi,
            views_mi: coords.views_mi,
            objective,
            achieved_kl: Some(achieved_kl),
        },
        final_residual: change,
        decrease: None,
        penalty_threshold: None,
        inner_residuals: None,
        log_residual_slope: if converged { log_residual_slope(&trajectory) } else { None },
        trajectory,
    };
    Ok(VariationalRun {
        decoders: theta,
        objectives,
        block_values,
        achieved_kl,
        converged,
        iterations,
        feasible: achieved_kl <= config.xi_filter,
        record,
        encoder,
    })
}

/// Free parameters of the decoders: `V |Z| |X|`, plus `|Z|` for the prior.
pub fn parameter_count(v_views: usize, z_card: usize, x_card: usize, count_prior: bool) -> usize {
    v_views * z_card * x_card + if count_prior { z_card } else { 0 }
}

/// Size of an encoder `P(Z | X^V)` over the same alphabets: `|Z| |X|^V`.
pub fn encoder_parameter_count(v_views: usize, z_card: usize, x_card: usize) -> usize {
    z_card * x_card.pow(v_views as u32)
}
