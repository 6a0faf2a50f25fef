//! Information-plane coordinates and clustering accuracy of trained encoders.

use pathfinding::prelude::{kuhn_munkres, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SampleSet;
use crate::error::{usage, Error, Result};
use crate::info::{
    conditional_entropy, conditional_mutual_information, encoder_joint, joint_entropy, mutual_information, to_bits,
    JointPmf,
};
use crate::model::Encoder;

/// Tolerance, in bits, on the identity `I(X1;X2|Z) = I(Z;X1,X2) - I(Z;X1) - I(Z;X2) + I(X1;X2)`.
pub const PLANE_IDENTITY_TOL: f64 = 1e-9;

/// Information coordinates of one encoder, all in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneCoords {
    pub sum_view_mi: f64,
    pub joint_mi: f64,
    pub residual_cmi: f64,
    pub views_mi: f64,
}

/// Coordinates of `encoder` under `joint_x`. With more than two views the
/// residual generalizes to the conditional total correlation
/// `sum_i H(Xi|Z) - H(X^V|Z)` and `views_mi` to the total correlation.
pub fn plane_point(encoder: &Encoder, joint_x: &JointPmf) -> Result<PlaneCoords> {
    let v = joint_x.num_axes();
    if v < 2 {
        return Err(usage("the information plane needs at least two views"));
    }
    if encoder.x_cards() != joint_x.cards() {
        return Err(usage(format!("encoder over {:?} used on a {:?} joint", encoder.x_cards(), joint_x.cards())));
    }
    let full = encoder_joint(joint_x, &encoder.to_cond())?;
    let all: Vec<usize> = (0..v).collect();
    let joint_mi = mutual_information(&full, &all, &[v])?;
    let mut sum_view_mi = 0.0;
    for i in 0..v {
        sum_view_mi += mutual_information(&full, &[i], &[v])?;
    }
    let (residual_cmi, views_mi) = if v == 2 {
        (conditional_mutual_information(&full, &[0], &[1], &[2])?, mutual_information(joint_x, &[0], &[1])?)
    } else {
        let mut resid = -conditional_entropy(&full, &all, &[v])?;
        let mut tc = -joint_entropy(joint_x, &all)?;
        for i in 0..v {
            resid += conditional_entropy(&full, &[i], &[v])?;
            tc += joint_entropy(joint_x, &[i])?;
        }
        (resid.max(0.0), tc.max(0.0))
    };
    let c = PlaneCoords {
        sum_view_mi: to_bits(sum_view_mi),
        joint_mi: to_bits(joint_mi),
        residual_cmi: to_bits(residual_cmi),
        views_mi: to_bits(views_mi),
    };
    let gap = c.residual_cmi - (c.joint_mi - c.sum_view_mi + c.views_mi);
    if gap.abs() > PLANE_IDENTITY_TOL {
        return Err(Error::Numerical { index: 0, message: format!("plane identity off by {gap} bits") });
    }
    Ok(c)
}

/// Joint-MI value on the zero-residual line: `sum_view_mi - i_x1x2`.
pub fn wyner_line(sum_view_mi: f64, i_x1x2: f64) -> f64 {
    sum_view_mi - i_x1x2
}

fn obs_index(encoder: &Encoder, samples: &SampleSet, n: usize) -> Result<usize> {
    let mut flat = 0;
    for (v, &card) in encoder.x_cards().iter().enumerate() {
        let x = samples.views[v][n];
        if x >= card {
            return Err(usage(format!("sample {n} has view-{v} symbol {x} outside an alphabet of {card}")));
        }
        flat = flat * card + x;
    }
    Ok(flat)
}

fn check_views(encoder: &Encoder, samples: &SampleSet) -> Result<()> {
    if samples.views.len() != encoder.x_cards().len() {
        return Err(usage(format!(
            "encoder expects {} views, samples carry {}",
            encoder.x_cards().len(),
            samples.views.len()
        )));
    }
    Ok(())
}

/// One latent hypothesis per sample, drawn by inverse-transform sampling from
/// the encoder row of that sample.
pub fn cluster_predict(encoder: &Encoder, test: &SampleSet, seed: u64) -> Result<Vec<usize>> {
    check_views(encoder, test)?;
    let cond = encoder.to_cond();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..test.len())
        .map(|n| {
            let row = cond.row(obs_index(encoder, test, n)?);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (z, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Ok(z);
                }
            }
            // u landed in the rounding gap above the last cumulative value.
            Ok(row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1))
        })
        .collect()
}

/// Deterministic most-likely latent per sample; for debugging only.
pub fn cluster_predict_argmax(encoder: &Encoder, test: &SampleSet) -> Result<Vec<usize>> {
    check_views(encoder, test)?;
    let cond = encoder.to_cond();
    (0..test.len())
        .map(|n| {
            let row = cond.row(obs_index(encoder, test, n)?);
            Ok(row.iter().enumerate().fold(0, |best, (z, &p)| if p > row[best] { z } else { best }))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Exhaustive,
    Assignment,
}

pub const MAX_EXHAUSTIVE_CARD: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub accuracy: f64,
    /// `mapping[z]` is the label assigned to latent `z`, if any.
    pub mapping: Vec<Option<usize>>,
    pub hypothesis_counts: Vec<usize>,
    pub residual_cmi: Option<f64>,
}

fn confusion(hypotheses: &[usize], labels: &[usize], z_card: usize, y_card: usize) -> Result<Vec<Vec<usize>>> {
    if hypotheses.len() != labels.len() {
        return Err(usage(format!("{} hypotheses for {} labels", hypotheses.len(), labels.len())));
    }
    let mut m = vec![vec![0usize; y_card]; z_card];
    for (&z, &y) in hypotheses.iter().zip(labels) {
        if z >= z_card || y >= y_card {
            return Err(usage(format!("pair (z = {z}, y = {y}) outside {z_card} x {y_card}")));
        }
        m[z][y] += 1;
    }
    Ok(m)
}

/// Visits every permutation of `0..n` (Heap's algorithm).
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Best accuracy over labelings `Z -> Y`, by enumeration or by max-weight
/// matching on the confusion matrix.
pub fn best_label_accuracy(
    hypotheses: &[usize],
    labels: &[usize],
    z_card: usize,
    y_card: usize,
    mode: MatchMode,
) -> Result<ClusterReport> {
    let m = confusion(hypotheses, labels, z_card, y_card)?;
    let hypothesis_counts: Vec<usize> = m.iter().map(|row| row.iter().sum()).collect();
    let (matched, mapping) = match mode {
        MatchMode::Exhaustive => {
            if z_card != y_card {
                return Err(usage("exhaustive matching needs |Z| = |Y|; use assignment mode"));
            }
            if z_card > MAX_EXHAUSTIVE_CARD {
                return Err(usage(format!(
                    "exhaustive matching over {z_card}! labelings is infeasible; use assignment mode"
                )));
            }
            let mut best = (0usize, (0..z_card).collect::<Vec<_>>());
            let mut first = true;
            for_each_permutation(z_card, |perm| {
                let score: usize = perm.iter().enumerate().map(|(z, &y)| m[z][y]).sum();
                if first || score > best.0 {
                    best = (score, perm.to_vec());
                    first = false;
                }
            });
            (best.0, best.1.into_iter().map(Some).collect())
        }
        MatchMode::Assignment => {
            let cols = y_card.max(z_card);
            let weights = Matrix::from_fn(z_card, cols, |(z, y)| if y < y_card { m[z][y] as i64 } else { 0 });
            let (total, assign) = kuhn_munkres(&weights);
            let mapping = assign.into_iter().map(|y| (y < y_card).then_some(y)).collect();
            (total as usize, mapping)
        }
    };
    let accuracy = if labels.is_empty() { 0.0 } else { matched as f64 / labels.len() as f64 };
    Ok(ClusterReport { accuracy, mapping, hypothesis_counts, residual_cmi: None })
}
