//! Weak-convexity moduli in negative-log coordinates and the ADMM penalty
//! bound they imply.
//!
//! Moduli follow the hypoconvexity convention where a function whose Hessian
//! is bounded below by `-s` is reported as `2s`-weakly convex.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::model::NEGLOG_FLOOR;

/// Modulus of the entropy `H = sum exp(-v) v` over `v >= eps0`, `0 < eps0 < 2`.
pub fn weak_convexity_sigma_entropy(eps0: f64) -> Result<f64> {
    if !(eps0 > 0.0 && eps0 < 2.0) {
        return Err(usage(format!("entropy modulus needs 0 < eps0 < 2, got {eps0}")));
    }
    Ok(2.0 * (-eps0).exp() * (2.0 - eps0))
}

/// Modulus of the negative entropy over all negative-log values.
pub fn weak_convexity_sigma_negentropy() -> f64 {
    2.0 * (-3.0f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityConstants {
    pub sigma_f: f64,
    pub sigma_g: f64,
    pub l_p: f64,
    pub delta: f64,
    pub c_threshold: f64,
}

impl ConvexityConstants {
    pub fn new(sigma_f: f64, sigma_g: f64, l_p: f64) -> Self {
        let delta = (sigma_f * sigma_f + 8.0 * l_p * l_p).sqrt();
        let c_threshold = sigma_g.max((sigma_f + delta) / 2.0);
        Self { sigma_f, sigma_g, l_p, delta, c_threshold }
    }

    /// Plug-in constants for `F` and `G` at multiplier `gamma`, with every
    /// entropy weighted by at most `max_cell_mass` and coordinates clipped
    /// below at `NEGLOG_FLOOR`.
    pub fn from_clipping(max_cell_mass: f64, gamma: f64) -> Self {
        let eps0 = NEGLOG_FLOOR;
        let s_h = weak_convexity_sigma_entropy(eps0).expect("floor lies inside (0, 2)");
        let s_neg = weak_convexity_sigma_negentropy();
        let sigma_f = (1.0 + gamma) * max_cell_mass * s_neg;
        // Largest curvature magnitude of exp(-v) v is reached at the floor.
        let l_p = (1.0 + gamma) * max_cell_mass * (-eps0).exp() * (2.0 - eps0);
        let sigma_g =
            max_cell_mass * ((1.0 - gamma).max(0.0) * s_h + (gamma - 1.0).max(0.0) * s_neg + 2.0 * gamma * s_h);
        Self::new(sigma_f, sigma_g, l_p)
    }

    pub fn delta_p(&self, c: f64) -> f64 {
        (c - self.sigma_f) / 2.0 - self.l_p * self.l_p / c
    }

    pub fn delta_q(&self, c: f64) -> f64 {
        (c - self.sigma_g) / 2.0
    }
}

/// `max{sigma_G, (sigma_F + Delta) / 2}` with `Delta = sqrt(sigma_F^2 + 8 L_p^2)`.
pub fn penalty_threshold(constants: &ConvexityConstants) -> f64 {
    constants.c_threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecreaseSample {
    pub lagrangian: f64,
    /// `||p^k - p^{k+1}||^2` for the step leaving this sample.
    pub dp_sq: f64,
    pub dq_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DecreaseReport {
    pub checked: usize,
    pub violations: usize,
    /// Most negative slack `L^k - L^{k+1} - dp |dp|^2 - dq |dq|^2`.
    pub worst_slack: f64,
}

impl DecreaseReport {
    pub fn violation_fraction(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.violations as f64 / self.checked as f64
        }
    }
}

pub const DECREASE_SLACK: f64 = 1e-8;

/// Streaming form of [`sufficient_decrease_check`].
#[derive(Debug, Clone)]
pub struct DecreaseMonitor {
    delta_p: f64,
    delta_q: f64,
    report: DecreaseReport,
}

impl DecreaseMonitor {
    pub fn new(delta_p: f64, delta_q: f64) -> Self {
        Self { delta_p, delta_q, report: DecreaseReport::default() }
    }

    pub fn push(&mut self, before: f64, after: f64, dp_sq: f64, dq_sq: f64) {
        let slack = before - after - self.delta_p * dp_sq - self.delta_q * dq_sq;
        self.report.checked += 1;
        if slack < -DECREASE_SLACK {
            self.report.violations += 1;
        }
        if self.report.checked == 1 || slack < self.report.worst_slack {
            self.report.worst_slack = slack;
        }
    }

    pub fn report(&self) -> DecreaseReport {
        self.report
    }
}

/// Checks every consecutive pair of a logged trajectory against the
/// sufficient-decrease inequality.
pub fn sufficient_decrease_check(trajectory: &[DecreaseSample], delta_p: f64, delta_q: f64) -> Result<DecreaseReport> {
    if trajectory.len() < 2 {
        return Err(usage("sufficient-decrease check needs at least two samples"));
    }
    let mut monitor = DecreaseMonitor::new(delta_p, delta_q);
    for pair in trajectory.windows(2) {
        monitor.push(pair[0].lagrangian, pair[1].lagrangian, pair[0].dp_sq, pair[0].dq_sq);
    }
    Ok(monitor.report())
}
