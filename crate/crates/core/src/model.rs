//! Parameter containers in negative-log coordinates.
//!
//! A conditional distribution `P(Z | g)` is stored as `v = -ln P(z | g)`, one
//! contiguous block of `card` values per conditioning value `g`. Every block
//! is kept inside `[NEGLOG_FLOOR, NEGLOG_CAP]` and normalized so that
//! `sum_z exp(-v_z) = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::info::{CondPmf, Pmf};

/// Lower clipping bound (machine precision).
pub const NEGLOG_FLOOR: f64 = f64::EPSILON;
/// Upper clipping bound; `exp(-30)` is about `9.4e-14`.
pub const NEGLOG_CAP: f64 = 30.0;

/// Normalizes one block in place: clip into the box, then find the common
/// shift `s` such that `sum exp(-clip(v + s)) = 1`.
///
/// The shift is monotone in the total mass, so a safeguarded Newton iteration
/// on `ln f(s)` converges in one or two steps unless many entries sit on the
/// box boundary.
pub(crate) fn normalize_block(block: &mut [f64]) {
    for v in block.iter_mut() {
        *v = v.clamp(NEGLOG_FLOOR, NEGLOG_CAP);
    }
    if ((block.iter().map(|&v| (-v).exp()).sum::<f64>()) - 1.0).abs() <= f64::EPSILON * block.len() as f64 {
        return;
    }
    let min = block.iter().copied().fold(f64::INFINITY, f64::min);
    let mass = |s: f64| -> (f64, f64) {
        let mut total = 0.0;
        let mut free = 0.0;
        for &v in block.iter() {
            let t = v + s;
            if t <= NEGLOG_FLOOR {
                total += (-NEGLOG_FLOOR).exp();
            } else if t >= NEGLOG_CAP {
                total += (-NEGLOG_CAP).exp();
            } else {
                let e = (-t).exp();
                total += e;
                free += e;
            }
        }
        (total, free)
    };
    // Log-sum-exp shift, exact whenever no entry leaves the box.
    let mut s = block.iter().map(|&v| (min - v).exp()).sum::<f64>().ln() - min;
    let (mut lo, mut hi) = (
        NEGLOG_FLOOR - block.iter().copied().fold(f64::NEG_INFINITY, f64::max) - 1.0,
        NEGLOG_CAP - min + 1.0,
    );
    for _ in 0..100 {
        let (total, free) = mass(s);
        let g = total.ln();
        if g.abs() <= 1e-15 {
            break;
        }
        if g > 0.0 {
            lo = lo.max(s);
        } else {
            hi = hi.min(s);
        }
        let step = if free > 0.0 { g * total / free } else { f64::NAN };
        if step.abs() <= 1e-15 * (1.0 + s.abs()) {
            break;
        }
        let next = s + step;
        s = if next.is_finite() && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 {
            break;
        }
    }
    for v in block.iter_mut() {
        *v = (*v + s).clamp(NEGLOG_FLOOR, NEGLOG_CAP);
    }
}

/// Pulls a coordinate gradient back through the shift normalization:
/// `g <- g - P * sum(g)` per block, the gradient of `f(normalize(v))` at a
/// normalized `v`. Its zeros are the stationary points of `f` on the
/// simplex, where the raw gradient is parallel to `P` rather than to the
/// all-ones vector.
pub(crate) fn pull_back(values: &[f64], card: usize, g: &mut [f64]) {
    for (gb, vb) in g.chunks_mut(card).zip(values.chunks(card)) {
        let total: f64 = gb.iter().sum();
        gb.iter_mut().zip(vb).for_each(|(gi, &v)| *gi -= (-v).exp() * total);
    }
}

/// Coordinates in which a solver measures how far an iterate moved.
///
/// Entries heading to zero move by `O(1/t)` per step in negative-log units
/// however small their mass, so a negative-log stopping rule keeps running
/// long after the distribution has settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeMeasure {
    #[default]
    Probability,
    Neglog,
}

impl ChangeMeasure {
    /// Euclidean distance between two negative-log vectors.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ChangeMeasure::Neglog => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            ChangeMeasure::Probability => {
                a.iter().zip(b).map(|(x, y)| ((-x).exp() - (-y).exp()).powi(2)).sum::<f64>().sqrt()
            }
        }
    }
}

/// Stack of simplices in negative-log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSimplex")]
pub struct NegLogSimplex {
    card: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawSimplex {
    card: usize,
    values: Vec<f64>,
}

impl TryFrom<RawSimplex> for NegLogSimplex {
    type Error = Error;
    fn try_from(raw: RawSimplex) -> Result<Self> {
        NegLogSimplex::project(raw.values, raw.card)
    }
}

impl NegLogSimplex {
    /// Clips and renormalizes every block of `values`.
    pub fn project(mut values: Vec<f64>, card: usize) -> Result<Self> {
        if card == 0 || values.is_empty() || !values.len().is_multiple_of(card) {
            return Err(usage(format!("{} values do not split into blocks of {card}", values.len())));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { index, message: format!("non-finite value {}", values[index]) });
        }
        values.chunks_mut(card).for_each(normalize_block);
        Ok(Self { card, values })
    }

    /// Uniform blocks: every entry `ln card`.
    pub fn uniform(card: usize, blocks: usize) -> Self {
        let mut values = vec![(card as f64).ln(); card * blocks];
        values.chunks_mut(card).for_each(normalize_block);
        Self { card, values }
    }

    /// Negative-log image of a row-stochastic table; zero mass maps to the cap.
    pub fn from_cond(cond: &CondPmf) -> Self {
        let values = cond
            .mass()
            .iter()
            .map(|&p| if p > 0.0 { (-p.ln()).min(NEGLOG_CAP) } else { NEGLOG_CAP })
            .collect();
        Self::project(values, cond.out_card()).expect("finite by construction")
    }

    pub fn to_cond(&self) -> CondPmf {
        let mut mass: Vec<f64> = self.values.iter().map(|&v| (-v).exp()).collect();
        for row in mass.chunks_mut(self.card) {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }
        CondPmf::new(self.num_blocks(), self.card, mass).expect("normalized blocks")
    }

    pub fn card(&self) -> usize {
        self.card
    }

    pub fn num_blocks(&self) -> usize {
        self.values.len() / self.card
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn block(&self, b: usize) -> &[f64] {
        &self.values[b * self.card..(b + 1) * self.card]
    }

    /// Overwrites the values and re-projects them.
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        *self = Self::project(values.to_vec(), self.card)?;
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn pull_back(&self, g: &mut [f64]) {
        pull_back(&self.values, self.card, g);
    }

    pub(crate) fn renormalize(&mut self) {
        let card = self.card;
        self.values.chunks_mut(card).for_each(normalize_block);
    }
}

pub(crate) fn random_simplex(rng: &mut ChaCha8Rng, card: usize, blocks: usize) -> NegLogSimplex {
    let mut values = Vec::with_capacity(card * blocks);
    for _ in 0..blocks {
        let draws: Vec<f64> = (0..card).map(|_| rng.random::<f64>()).collect();
        let total: f64 = draws.iter().sum();
        values.extend(draws.iter().map(|&u| if u > 0.0 { -(u / total).ln() } else { NEGLOG_CAP }));
    }
    NegLogSimplex::project(values, card).expect("finite by construction")
}

/// Encoder `P(Z | X^V)`: one negative-log block of size `z_card` per joint
/// observation, in row-major order of `x_cards`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EncoderFile", into = "EncoderFile")]
pub struct Encoder {
    z_card: usize,
    x_cards: Vec<usize>,
    table: NegLogSimplex,
}

#[derive(Serialize, Deserialize)]
struct EncoderFile {
    z_card: usize,
    x_cards: Vec<usize>,
    neglog: Vec<f64>,
}

impl TryFrom<EncoderFile> for Encoder {
    type Error = Error;
    fn try_from(f: EncoderFile) -> Result<Self> {
        Encoder::from_neglog(f.z_card, f.x_cards, f.neglog)
    }
}

impl From<Encoder> for EncoderFile {
    fn from(e: Encoder) -> Self {
        EncoderFile { z_card: e.z_card, x_cards: e.x_cards, neglog: e.table.values }
    }
}

fn check_cards(z_card: usize, x_cards: &[usize]) -> Result<usize> {
    if z_card == 0 || x_cards.is_empty() || x_cards.contains(&0) {
        return Err(usage(format!("invalid cardinalities |Z| = {z_card}, |X| = {x_cards:?}")));
    }
    Ok(x_cards.iter().product())
}

impl Encoder {
    pub fn from_neglog(z_card: usize, x_cards: Vec<usize>, neglog: Vec<f64>) -> Result<Self> {
        let obs = check_cards(z_card, &x_cards)?;
        if neglog.len() != obs * z_card {
            return Err(usage(format!("encoder needs {} values, got {}", obs * z_card, neglog.len())));
        }
        Ok(Self { z_card, x_cards, table: NegLogSimplex::project(neglog, z_card)? })
    }

    /// Each block normalizes independent uniform(0, 1) draws; deterministic per seed.
    pub fn random(seed: u64, z_card: usize, x_cards: &[usize]) -> Result<Self> {
        let obs = check_cards(z_card, x_cards)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self { z_card, x_cards: x_cards.to_vec(), table: random_simplex(&mut rng, z_card, obs) })
    }

    pub fn uniform(z_card: usize, x_cards: &[usize]) -> Result<Self> {
        let obs = check_cards(z_card, x_cards)?;
        Ok(Self { z_card, x_cards: x_cards.to_vec(), table: NegLogSimplex::uniform(z_card, obs) })
    }

    pub fn from_cond(x_cards: &[usize], cond: &CondPmf) -> Result<Self> {
        let obs = check_cards(cond.out_card(), x_cards)?;
        if cond.given_card() != obs {
            return Err(usage(format!("table conditions on {} values, expected {obs}", cond.given_card())));
        }
        Ok(Self { z_card: cond.out_card(), x_cards: x_cards.to_vec(), table: NegLogSimplex::from_cond(cond) })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("encoder serializes")
    }

    pub fn z_card(&self) -> usize {
        self.z_card
    }

    pub fn x_cards(&self) -> &[usize] {
        &self.x_cards
    }

    pub fn num_obs(&self) -> usize {
        self.table.num_blocks()
    }

    pub fn neglog(&self) -> &NegLogSimplex {
        &self.table
    }

    pub(crate) fn neglog_mut(&mut self) -> &mut NegLogSimplex {
        &mut self.table
    }

    pub fn to_cond(&self) -> CondPmf {
        self.table.to_cond()
    }

    /// Relabels latent values: new row entry `z` takes the old entry `perm[z]`.
    pub fn permute_latents(&self, perm: &[usize]) -> Self {
        let mut values = self.table.values.clone();
        for (dst, src) in values.chunks_mut(self.z_card).zip(self.table.values.chunks(self.z_card)) {
            for (z, d) in dst.iter_mut().enumerate() {
                *d = src[perm[z]];
            }
        }
        Self { z_card: self.z_card, x_cards: self.x_cards.clone(), table: NegLogSimplex { card: self.z_card, values } }
    }
}

/// Generative parameters: prior `P(Z)` and one decoder `P(X_i | Z)` per view,
/// each decoder held in negative-log coordinates (`z_card` blocks of `|X_i|`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderSet {
    prior_z: Pmf,
    views: Vec<NegLogSimplex>,
}

impl DecoderSet {
    pub fn new(prior_z: Pmf, views: Vec<NegLogSimplex>) -> Result<Self> {
        if views.is_empty() {
            return Err(usage("decoder set needs at least one view"));
        }
        if let Some(v) = views.iter().find(|v| v.num_blocks() != prior_z.card()) {
            return Err(usage(format!("decoder has {} latent rows, prior has {}", v.num_blocks(), prior_z.card())));
        }
        Ok(Self { prior_z, views })
    }

    pub fn from_conds(prior_z: Pmf, decoders: &[CondPmf]) -> Result<Self> {
        Self::new(prior_z, decoders.iter().map(NegLogSimplex::from_cond).collect())
    }

    /// Uniform prior, decoders initialized from normalized uniform draws.
    pub fn random(seed: u64, z_card: usize, x_cards: &[usize]) -> Result<Self> {
        check_cards(z_card, x_cards)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let views = x_cards.iter().map(|&c| random_simplex(&mut rng, c, z_card)).collect();
        Self::new(Pmf::uniform(z_card), views)
    }

    pub fn prior_z(&self) -> &Pmf {
        &self.prior_z
    }

    pub fn z_card(&self) -> usize {
        self.prior_z.card()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn x_cards(&self) -> Vec<usize> {
        self.views.iter().map(NegLogSimplex::card).collect()
    }

    pub fn view(&self, i: usize) -> &NegLogSimplex {
        &self.views[i]
    }

    pub(crate) fn view_mut(&mut self, i: usize) -> &mut NegLogSimplex {
        &mut self.views[i]
    }

    pub fn decoders(&self) -> Vec<CondPmf> {
        self.views.iter().map(NegLogSimplex::to_cond).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn block_mass(block: &[f64]) -> f64 {
        block.iter().map(|v| (-v).exp()).sum()
    }

    #[test]
    fn normalized_block_is_unchanged() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let values: Vec<f64> = probs.iter().map(|p: &f64| -p.ln()).collect();
        let s = NegLogSimplex::project(values.clone(), 4).unwrap();
        for (a, b) in s.values().iter().zip(&values) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn equal_block_maps_to_log_card() {
        let s = NegLogSimplex::project(vec![3.7; 8], 8).unwrap();
        for v in s.values() {
            assert_abs_diff_eq!(*v, 8f64.ln(), epsilon = 1e-12);
        }
    }

    #[test]
    fn negative_entry_is_clipped_then_normalized() {
        let s = NegLogSimplex::project(vec![-5.0, 1.0, 2.0, 3.0], 4).unwrap();
        let want = [0.44018969856119544, 1.4401896985611953, 2.4401896985611953, 3.4401896985611953];
        for (a, b) in s.values().iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(block_mass(s.values()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cap_binds_after_shift() {
        let s = NegLogSimplex::project(vec![0.1, 2.0, 29.99], 3).unwrap();
        let want = [0.1393867582830542, 2.039386758283054, 30.0];
        for (a, b) in s.values().iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_finite_input_reports_index() {
        match NegLogSimplex::project(vec![1.0, f64::NAN, 2.0, 3.0], 2) {
            Err(Error::Numerical { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn random_encoder_is_deterministic_and_valid() {
        let a = Encoder::random(7, 8, &[16, 16]).unwrap();
        let b = Encoder::random(7, 8, &[16, 16]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Encoder::random(8, 8, &[16, 16]).unwrap());
        assert_eq!(a.num_obs(), 256);
        for block in a.neglog().values().chunks(8) {
            assert_abs_diff_eq!(block_mass(block), 1.0, epsilon = 1e-10);
            assert!(block.iter().all(|&v| (NEGLOG_FLOOR..=NEGLOG_CAP).contains(&v)));
        }
    }

    #[test]
    fn single_latent_is_point_mass() {
        let e = Encoder::random(3, 1, &[4, 4]).unwrap();
        for &v in e.neglog().values() {
            assert!(v <= 1e-15);
        }
        assert!(e.to_cond().mass().iter().all(|&p| (p - 1.0).abs() < 1e-15));
    }

    #[test]
    fn chart_round_trip() {
        let e = Encoder::random(11, 8, &[16, 16]).unwrap();
        let back = Encoder::from_cond(&[16, 16], &e.to_cond()).unwrap();
        let dev = e.neglog().values().iter().zip(back.neglog().values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-10, "deviation {dev}");

        let point = CondPmf::new(1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        let s = NegLogSimplex::from_cond(&point);
        assert!(s.values()[1] < 1e-12);
        assert!(s.values()[0] >= NEGLOG_CAP - 1e-9 && s.values()[2] >= NEGLOG_CAP - 1e-9);

        let u = NegLogSimplex::from_cond(&CondPmf::uniform(2, 5));
        assert!(u.values().iter().all(|&v| (v - 5f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn encoder_json_round_trip() {
        let e = Encoder::random(1, 3, &[2, 4]).unwrap();
        let back = Encoder::from_json(&e.to_json()).unwrap();
        assert_eq!(back, e);
        assert!(Encoder::from_json(r#"{"z_card":2,"x_cards":[2],"neglog":[1.0]}"#).is_err());
    }

    #[test]
    fn decoder_set_checks_latent_rows() {
        let views = vec![NegLogSimplex::uniform(4, 3), NegLogSimplex::uniform(4, 2)];
        assert!(DecoderSet::new(Pmf::uniform(3), views).is_err());
        let d = DecoderSet::random(5, 3, &[4, 6]).unwrap();
        assert_eq!(d.x_cards(), vec![4, 6]);
        assert_eq!(d.decoders()[1].given_card(), 3);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_order_preserving(
            raw in prop::collection::vec(-10.0f64..45.0, 1..12)
        ) {
            let card = raw.len();
            let once = NegLogSimplex::project(raw.clone(), card).unwrap();
            let twice = NegLogSimplex::project(once.values().to_vec(), card).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            if card > 1 {
                prop_assert!((block_mass(once.values()) - 1.0).abs() <= 1e-10);
            }
            for i in 0..card {
                for j in 0..card {
                    if raw[i] < raw[j] {
                        prop_assert!(once.values()[i] <= once.values()[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn pull_back_is_gradient_through_normalization() {
        let v = NegLogSimplex::project(vec![0.3, 1.2, 2.5, 0.9, 0.1, 4.0], 3).unwrap();
        let (a, b) = ([0.5, -1.0, 2.0, 0.3, 0.7, -0.2], [1.5, 0.2, -0.4, 2.0, 1.0, 0.5]);
        let f = |x: &[f64]| -> f64 { x.iter().enumerate().map(|(i, &t)| a[i] * t + b[i] * (-t).exp()).sum() };
        let shifted = |x: &[f64]| -> Vec<f64> {
            let mut out = x.to_vec();
            for block in out.chunks_mut(3) {
                let lse = block.iter().map(|t| (-t).exp()).sum::<f64>().ln();
                block.iter_mut().for_each(|t| *t += lse);
            }
            out
        };
        let mut g: Vec<f64> = v.values().iter().enumerate().map(|(i, &t)| a[i] - b[i] * (-t).exp()).collect();
        v.pull_back(&mut g);
        let h = 1e-6;
        for k in 0..6 {
            let (mut up, mut down) = (v.values().to_vec(), v.values().to_vec());
            up[k] += h;
            down[k] -= h;
            let fd = (f(&shifted(&up)) - f(&shifted(&down))) / (2.0 * h);
            assert_abs_diff_eq!(g[k], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn change_measures() {
        let a = [0.0, 30.0];
        let b = [1.0, 20.0];
        assert_abs_diff_eq!(ChangeMeasure::Neglog.distance(&a, &b), 101f64.sqrt(), epsilon = 1e-12);
        let pa = [1.0f64, (-30.0f64).exp()];
        let pb = [(-1.0f64).exp(), (-20.0f64).exp()];
        let want = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        assert_abs_diff_eq!(ChangeMeasure::Probability.distance(&a, &b), want, epsilon = 1e-15);
        assert_eq!(ChangeMeasure::default(), ChangeMeasure::Probability);
    }
}
