//! Result schema shared by every solver.

use serde::{Deserialize, Serialize};

use crate::model::Encoder;
use crate::representation::convexity::DecreaseReport;
use crate::representation::{AdmmConfig, BaselineConfig};
use crate::variational::VariationalConfig;

/// Iterations between retained trajectory points.
pub const TRAJECTORY_STRIDE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Variational,
    Admm,
    Baseline,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Variational => "variational",
            SolverKind::Admm => "admm",
            SolverKind::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "variational" => Ok(SolverKind::Variational),
            "admm" => Ok(SolverKind::Admm),
            "baseline" => Ok(SolverKind::Baseline),
            other => Err(crate::error::usage(format!(
                "unknown solver `{other}` (expected variational, admm or baseline)"
            ))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "lowercase")]
pub enum SolverConfig {
    Variational(VariationalConfig),
    Admm(AdmmConfig),
    Baseline(BaselineConfig),
}

impl SolverConfig {
    pub fn kind(&self) -> SolverKind {
        match self {
            SolverConfig::Variational(_) => SolverKind::Variational,
            SolverConfig::Admm(_) => SolverKind::Admm,
            SolverConfig::Baseline(_) => SolverKind::Baseline,
        }
    }

    /// The swept multiplier: `beta` for Solver I, `gamma` otherwise.
    pub fn multiplier(&self) -> f64 {
        match self {
            SolverConfig::Variational(c) => c.beta,
            SolverConfig::Admm(c) => c.gamma,
            SolverConfig::Baseline(c) => c.gamma,
        }
    }

    pub fn z_card(&self) -> usize {
        match self {
            SolverConfig::Variational(c) => c.z_card,
            SolverConfig::Admm(c) => c.z_card,
            SolverConfig::Baseline(c) => c.z_card,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SolverConfig::Variational(c) => c.seed,
            SolverConfig::Admm(c) => c.seed,
            SolverConfig::Baseline(c) => c.seed,
        }
    }
}

/// Final information coordinates (bits) and objective value (nats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub joint_mi: f64,
    pub sum_view_mi: f64,
    pub residual_cmi: f64,
    pub views_mi: f64,
    /// `L_gamma` for the encoder solvers, the variational Lagrangian for Solver I.
    pub objective: f64,
    /// `D_KL[P(X^V) || P_theta(X^V)]` in nats; Solver I only.
    pub achieved_kl: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub objective: f64,
    /// Absent before the first step.
    pub residual: Option<f64>,
}

/// Norms of the last projected steps taken by the inner subproblems in the
/// final outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerResiduals {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SolverConfig,
    pub converged: bool,
    pub iterations: usize,
    pub metrics: RunMetrics,
    /// The quantity compared against the stopping tolerance at the last iteration.
    pub final_residual: f64,
    pub decrease: Option<DecreaseReport>,
    pub penalty_threshold: Option<f64>,
    pub inner_residuals: Option<InnerResiduals>,
    /// Least-squares slope of `ln residual` against iteration over the second
    /// half of the trajectory.
    pub log_residual_slope: Option<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl RunRecord {
    pub fn solver(&self) -> SolverKind {
        self.config.kind()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records serialize")
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A record plus the encoder it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: RunRecord,
    pub encoder: Encoder,
}

/// Collects every [`TRAJECTORY_STRIDE`]-th point plus whatever is pushed last.
#[derive(Debug, Clone, Default)]
pub(crate) struct TrajectoryLog {
    points: Vec<TrajectoryPoint>,
}

impl TrajectoryLog {
    pub fn observe(&mut self, iteration: usize, objective: f64, residual: f64) {
        if iteration.is_multiple_of(TRAJECTORY_STRIDE) {
            self.points.push(TrajectoryPoint { iteration, objective, residual: finite(residual) });
        }
    }

    pub fn finish(mut self, iteration: usize, objective: f64, residual: f64) -> Vec<TrajectoryPoint> {
        if self.points.last().map(|p| p.iteration) != Some(iteration) {
            self.points.push(TrajectoryPoint { iteration, objective, residual: finite(residual) });
        }
        self.points
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub(crate) fn log_residual_slope(points: &[TrajectoryPoint]) -> Option<f64> {
    let tail: Vec<(f64, f64)> = points[points.len() / 2..]
        .iter()
        .filter_map(|p| p.residual.filter(|&r| r > 0.0).map(|r| (p.iteration as f64, r.ln())))
        .collect();
    if tail.len() < 2 {
        return None;
    }
    let n = tail.len() as f64;
    let mx = tail.iter().map(|t| t.0).sum::<f64>() / n;
    let my = tail.iter().map(|t| t.1).sum::<f64>() / n;
    let sxx: f64 = tail.iter().map(|t| (t.0 - mx).powi(2)).sum();
    let sxy: f64 = tail.iter().map(|t| (t.0 - mx) * (t.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
