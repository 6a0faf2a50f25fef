//! Encoder-side formulation: the two-view Lagrangian `L_gamma`, its ADMM
//! splitting into `F(p) + G(q)`, the projected-gradient baseline, and the
//! V-view Lagrangian used for evaluation.

pub mod admm;
pub mod baseline;
pub mod convexity;
pub mod objectives;

use std::collections::BTreeMap;

use crate::error::{usage, Error, Result};
use crate::info::{conditional_entropy, encoder_joint, joint_entropy, JointPmf};
use crate::model::Encoder;

pub use admm::{admm_step, solve_admm, AdmmConfig, AdmmState};
pub use baseline::{solve_baseline, BaselineConfig};
pub use convexity::{
    penalty_threshold, sufficient_decrease_check, weak_convexity_sigma_entropy, weak_convexity_sigma_negentropy,
    ConvexityConstants, DecreaseReport, DecreaseSample,
};
pub use objectives::TwoViewProblem;

fn check_encoder(encoder: &Encoder, joint_x: &JointPmf) -> Result<()> {
    if encoder.x_cards() != joint_x.cards() {
        return Err(usage(format!("encoder over {:?} used on a {:?} joint", encoder.x_cards(), joint_x.cards())));
    }
    Ok(())
}

/// `(1 - gamma) H(Z) - (1 + gamma) H(Z|X1,X2) + gamma H(Z|X1) + gamma H(Z|X2)`
/// in nats, from the joint the encoder induces.
pub fn lagrangian_gamma(encoder: &Encoder, joint_x: &JointPmf, gamma: f64) -> Result<f64> {
    if joint_x.num_axes() != 2 {
        return Err(usage("L_gamma is defined for two views"));
    }
    let mut gammas = BTreeMap::new();
    gammas.insert(vec![0], gamma);
    lagrangian_multiview(encoder, joint_x, &gammas)
}

/// `(F(p), G(q))` for the split Lagrangian.
pub fn split_objectives(p: &Encoder, q: &Encoder, joint_x: &JointPmf, gamma: f64) -> Result<(f64, f64)> {
    check_encoder(p, joint_x)?;
    check_encoder(q, joint_x)?;
    if p.z_card() != q.z_card() {
        return Err(usage("p and q disagree on |Z|"));
    }
    let problem = TwoViewProblem::dense(joint_x, p.z_card())?;
    Ok((problem.f_value(p.neglog().values(), gamma), problem.g_value(q.neglog().values(), gamma)))
}

/// `F(p) + G(q) + <nu, p - q> + (c/2) |p - q|^2`.
pub fn augmented_lagrangian(state: &AdmmState, joint_x: &JointPmf, gamma: f64, c: f64) -> Result<f64> {
    let (p, q) = (state.p.neglog().values(), state.q.neglog().values());
    if state.nu.len() != p.len() {
        return Err(usage(format!("dual has {} entries, encoder has {}", state.nu.len(), p.len())));
    }
    if let Some(index) = state.nu.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical { index, message: "non-finite dual variable".into() });
    }
    let (f, g) = split_objectives(&state.p, &state.q, joint_x, gamma)?;
    Ok(f + g + admm::coupling(p, q, &state.nu, c))
}

/// V-view Lagrangian `(1 - S) H(Z) - (1 + S) H(Z|X^V) + sum_S g_S [H(Z|X_S) + H(Z|X_S^c)]`
/// with `S = sum_S g_S`. Keys are sorted view-index sets, proper and nonempty.
pub fn lagrangian_multiview(encoder: &Encoder, joint_x: &JointPmf, gammas: &BTreeMap<Vec<usize>, f64>) -> Result<f64> {
    check_encoder(encoder, joint_x)?;
    let v = joint_x.num_axes();
    for (set, &g) in gammas {
        if set.is_empty() || set.len() >= v {
            return Err(usage(format!("partition key {set:?} must be a proper nonempty subset of {v} views")));
        }
        if set.windows(2).any(|w| w[0] >= w[1]) || set.iter().any(|&i| i >= v) {
            return Err(usage(format!("partition key {set:?} must be strictly increasing view indices below {v}")));
        }
        if !(g >= 0.0) || !g.is_finite() {
            return Err(usage(format!("multiplier for {set:?} must be finite and nonnegative, got {g}")));
        }
    }
    let full = encoder_joint(joint_x, &encoder.to_cond())?;
    let z = [v];
    let all: Vec<usize> = (0..v).collect();
    let total: f64 = gammas.values().sum();
    let mut value = (1.0 - total) * joint_entropy(&full, &z)? - (1.0 + total) * conditional_entropy(&full, &z, &all)?;
    for (set, &g) in gammas {
        let rest: Vec<usize> = all.iter().copied().filter(|i| !set.contains(i)).collect();
        value += g * (conditional_entropy(&full, &z, set)? + conditional_entropy(&full, &z, &rest)?);
    }
    Ok(value)
}
