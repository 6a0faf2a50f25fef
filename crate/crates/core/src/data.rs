//! Circulant two-view benchmark: a uniform label `Y` and views drawn
//! independently from a block-shifted conditional table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::info::{compose_joint, CondPmf, JointPmf, Pmf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub y_card: usize,
    pub x_card: usize,
    pub delta: f64,
    /// Width of the column block each label owns.
    pub block: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self { y_card: 8, x_card: 16, delta: 0.0, block: 2, n_train: 100_000, n_test: 10_000, seed: 0 }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.y_card == 0 || self.block == 0 {
            return Err(usage("label alphabet and block width must be positive"));
        }
        if self.x_card != self.block * self.y_card {
            return Err(usage(format!(
                "x_card {} must equal block {} times y_card {}",
                self.x_card, self.block, self.y_card
            )));
        }
        if !(0.0..0.5).contains(&self.delta) {
            return Err(usage(format!("noise level must lie in [0, 0.5), got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Labels and per-view observations, aligned by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub y_card: usize,
    pub x_cards: Vec<usize>,
    pub labels: Vec<usize>,
    pub views: Vec<Vec<usize>>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.views.len() != self.x_cards.len() {
            return Err(usage(format!("{} views but {} alphabets", self.views.len(), self.x_cards.len())));
        }
        for (v, (obs, &card)) in self.views.iter().zip(&self.x_cards).enumerate() {
            if obs.len() != self.labels.len() {
                return Err(usage(format!("view {v} has {} samples, labels have {}", obs.len(), self.labels.len())));
            }
            if let Some(n) = obs.iter().position(|&x| x >= card) {
                return Err(usage(format!("sample {n} of view {v} is outside an alphabet of {card}")));
            }
        }
        if let Some(n) = self.labels.iter().position(|&y| y >= self.y_card) {
            return Err(usage(format!("label {n} is outside an alphabet of {}", self.y_card)));
        }
        Ok(())
    }
}

/// `P(X | Y)`: row `y` spreads `1 - 2 delta` over its own block and `2 delta`
/// over the circularly previous block.
pub fn conditional_table(spec: &DatasetSpec) -> Result<CondPmf> {
    spec.validate()?;
    let (yc, xc, b) = (spec.y_card, spec.x_card, spec.block);
    let own = (1.0 - 2.0 * spec.delta) / b as f64;
    let leak = 2.0 * spec.delta / b as f64;
    let mut mass = vec![0.0; yc * xc];
    for y in 0..yc {
        let prev = (y + yc - 1) % yc;
        for j in 0..b {
            mass[y * xc + y * b + j] += own;
            mass[y * xc + prev * b + j] += leak;
        }
    }
    CondPmf::new(yc, xc, mass)
}

/// `P(X1, X2) = sum_y P(y) P(X1|y) P(X2|y)` with uniform `P(y)`.
pub fn compose_dataset_joint(spec: &DatasetSpec) -> Result<JointPmf> {
    let table = conditional_table(spec)?;
    compose_joint(&Pmf::uniform(spec.y_card), &[table.clone(), table])
}

fn inverse_transform(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Draws `n_train` or `n_test` labelled pairs. Every (split, role) pair reads
/// its own ChaCha stream, so the test set never shares draws with training
/// and each view is independent of the labels' generator state.
pub fn draw_samples(spec: &DatasetSpec, split: Split) -> Result<SampleSet> {
    let table = conditional_table(spec)?;
    let n = match split {
        Split::Train => spec.n_train,
        Split::Test => spec.n_test,
    };
    let split_id = match split {
        Split::Train => 0,
        Split::Test => 1,
    };
    let stream = |role: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(split_id * 16 + role);
        rng
    };
    let mut label_rng = stream(0);
    let prior = vec![1.0 / spec.y_card as f64; spec.y_card];
    let labels: Vec<usize> = (0..n).map(|_| inverse_transform(&prior, label_rng.random())).collect();
    let views = (0..2)
        .map(|v| {
            let mut rng = stream(1 + v);
            labels.iter().map(|&y| inverse_transform(table.row(y), rng.random())).collect()
        })
        .collect();
    Ok(SampleSet { y_card: spec.y_card, x_cards: vec![spec.x_card; 2], labels, views })
}

/// Normalized co-occurrence counts of the views, without smoothing.
pub fn empirical_joint(samples: &SampleSet) -> Result<JointPmf> {
    if samples.is_empty() {
        return Err(usage("cannot estimate a joint from zero samples"));
    }
    samples.validate()?;
    let cards = samples.x_cards.clone();
    let mut counts = vec![0u64; cards.iter().product()];
    for n in 0..samples.len() {
        let flat = samples.views.iter().zip(&cards).fold(0, |acc, (obs, &c)| acc * c + obs[n]);
        counts[flat] += 1;
    }
    let total = samples.len() as f64;
    JointPmf::new(cards, counts.iter().map(|&c| c as f64 / total).collect())
}
