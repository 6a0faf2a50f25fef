//! Exact information quantities over dense probability tables.
//!
//! Everything is computed in nats; [`Base`] converts at the reporting edge.
//! The conventions `0 log 0 = 0` and `0 log (0/0) = 0` apply entry-wise.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// Entries at or below this mass count as zeros for support checks.
pub const PROB_FLOOR: f64 = 1e-12;
/// Tolerance on the total mass accepted by the validating constructors.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Slack under which a negative MI/CMI/entropy is treated as roundoff and clamped.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Nats,
    Bits,
}

impl Base {
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Base::Nats => nats,
            Base::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

pub fn to_bits(nats: f64) -> f64 {
    Base::Bits.from_nats(nats)
}

fn check_simplex(mass: &[f64], what: &str) -> Result<()> {
    if mass.is_empty() {
        return Err(Error::Validation(format!("{what}: empty table")));
    }
    for (i, &m) in mass.iter().enumerate() {
        if !m.is_finite() || m < 0.0 {
            return Err(Error::Validation(format!("{what}: entry {i} = {m} is not a nonnegative number")));
        }
    }
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Validation(format!("{what}: mass sums to {total}, not 1")));
    }
    Ok(())
}

/// `-sum p ln p` over a flat slice.
pub(crate) fn entropy_of(mass: &[f64]) -> f64 {
    mass.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

fn clamp_nonneg(v: f64) -> f64 {
    if (-CLAMP_TOL..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// Probability vector over a single alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    mass: Vec<f64>,
}

impl Pmf {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        check_simplex(&mass, "pmf")?;
        Ok(Self { mass })
    }

    pub fn uniform(card: usize) -> Self {
        assert!(card > 0, "uniform pmf needs a nonempty alphabet");
        Self { mass: vec![1.0 / card as f64; card] }
    }

    pub fn point(card: usize, at: usize) -> Self {
        let mut mass = vec![0.0; card];
        mass[at] = 1.0;
        Self { mass }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn card(&self) -> usize {
        self.mass.len()
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;
    fn try_from(mass: Vec<f64>) -> Result<Self> {
        Pmf::new(mass)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(p: Pmf) -> Self {
        p.mass
    }
}

/// Row-stochastic table: one simplex of size `out_card` per conditioning value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondPmf {
    given_card: usize,
    out_card: usize,
    mass: Vec<f64>,
}

impl CondPmf {
    pub fn new(given_card: usize, out_card: usize, mass: Vec<f64>) -> Result<Self> {
        if given_card == 0 || out_card == 0 || mass.len() != given_card * out_card {
            return Err(usage(format!(
                "conditional table of {given_card}x{out_card} cannot hold {} entries",
                mass.len()
            )));
        }
        for (g, row) in mass.chunks(out_card).enumerate() {
            check_simplex(row, &format!("conditional row {g}"))?;
        }
        Ok(Self { given_card, out_card, mass })
    }

    pub fn uniform(given_card: usize, out_card: usize) -> Self {
        Self { given_card, out_card, mass: vec![1.0 / out_card as f64; given_card * out_card] }
    }

    pub fn given_card(&self) -> usize {
        self.given_card
    }

    pub fn out_card(&self) -> usize {
        self.out_card
    }

    pub fn row(&self, given: usize) -> &[f64] {
        &self.mass[given * self.out_card..(given + 1) * self.out_card]
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
}

#[derive(Deserialize)]
struct RawJoint {
    cards: Vec<usize>,
    mass: Vec<f64>,
}

/// Dense joint distribution over `V` view alphabets, stored row-major
/// (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJoint")]
pub struct JointPmf {
    cards: Vec<usize>,
    mass: Vec<f64>,
}

impl TryFrom<RawJoint> for JointPmf {
    type Error = Error;
    fn try_from(raw: RawJoint) -> Result<Self> {
        JointPmf::new(raw.cards, raw.mass)
    }
}

impl JointPmf {
    pub fn new(cards: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        if cards.is_empty() || cards.contains(&0) {
            return Err(usage(format!("joint needs at least one axis of positive size, got {cards:?}")));
        }
        let len: usize = cards.iter().product();
        if len != mass.len() {
            return Err(usage(format!("cards {cards:?} describe {len} cells but {} were given", mass.len())));
        }
        check_simplex(&mass, "joint")?;
        Ok(Self { cards, mass })
    }

    /// Product of independent marginals.
    pub fn product(marginals: &[Pmf]) -> Result<Self> {
        let cards: Vec<usize> = marginals.iter().map(Pmf::card).collect();
        let mut mass = vec![1.0];
        for m in marginals {
            mass = mass.iter().flat_map(|&a| m.mass().iter().map(move |&b| a * b)).collect();
        }
        JointPmf::new(cards, mass)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("joint serializes")
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn num_axes(&self) -> usize {
        self.cards.len()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.cards).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.mass[self.flat_index(index)]
    }

    /// Marginal over `axes`, with the output axes in the order given.
    pub fn marginal(&self, axes: &[usize]) -> Result<JointPmf> {
        check_axes(self, &[axes])?;
        if axes.is_empty() {
            return Ok(JointPmf { cards: vec![1], mass: vec![self.mass.iter().sum()] });
        }
        Ok(self.marginal_unchecked(axes))
    }

    fn marginal_unchecked(&self, axes: &[usize]) -> JointPmf {
        let out_cards: Vec<usize> = axes.iter().map(|&a| self.cards[a]).collect();
        let out_len: usize = out_cards.iter().product();
        // Stride of each source axis inside the output table (0 when summed out).
        let mut out_stride = vec![0usize; self.cards.len()];
        let mut s = 1;
        for (k, &a) in axes.iter().enumerate().rev() {
            out_stride[a] = s;
            s *= out_cards[k];
        }
        let mut mass = vec![0.0; out_len];
        let mut idx = vec![0usize; self.cards.len()];
        let mut target = 0usize;
        for &m in &self.mass {
            mass[target] += m;
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                target += out_stride[ax];
                if idx[ax] < self.cards[ax] {
                    break;
                }
                target -= out_stride[ax] * idx[ax];
                idx[ax] = 0;
            }
        }
        JointPmf { cards: out_cards, mass }
    }

    fn entropy_of_axes(&self, axes: &[usize]) -> f64 {
        if axes.is_empty() {
            return 0.0;
        }
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        entropy_of(&self.marginal_unchecked(&sorted).mass)
    }
}

fn check_axes(joint: &JointPmf, groups: &[&[usize]]) -> Result<()> {
    let mut seen = vec![false; joint.num_axes()];
    for group in groups {
        for &a in *group {
            if a >= seen.len() {
                return Err(usage(format!("axis {a} out of range for a {}-axis joint", seen.len())));
            }
            if seen[a] {
                return Err(usage(format!("axis {a} appears in more than one axis group")));
            }
            seen[a] = true;
        }
    }
    Ok(())
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().chain(b).copied().collect()
}

pub fn entropy(p: &Pmf, base: Base) -> f64 {
    base.from_nats(entropy_of(p.mass()))
}

/// Joint entropy of the given axes, in nats.
pub fn joint_entropy(joint: &JointPmf, axes: &[usize]) -> Result<f64> {
    check_axes(joint, &[axes])?;
    Ok(joint.entropy_of_axes(axes))
}

/// `H(target | given) = H(target, given) - H(given)`, in nats.
pub fn conditional_entropy(joint: &JointPmf, target: &[usize], given: &[usize]) -> Result<f64> {
    check_axes(joint, &[target, given])?;
    let h = joint.entropy_of_axes(&union(target, given)) - joint.entropy_of_axes(given);
    Ok(clamp_nonneg(h))
}

/// `I(A; B) = H(A) + H(B) - H(A, B)`, in nats.
pub fn mutual_information(joint: &JointPmf, a: &[usize], b: &[usize]) -> Result<f64> {
    check_axes(joint, &[a, b])?;
    let mi = joint.entropy_of_axes(a) + joint.entropy_of_axes(b) - joint.entropy_of_axes(&union(a, b));
    Ok(clamp_nonneg(mi))
}

/// `I(A; B | C)` summed cell by cell from the conditional tables, in nats.
pub fn conditional_mutual_information(joint: &JointPmf, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
    check_axes(joint, &[a, b, c])?;
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let abc_axes: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
    let abc = joint.marginal_unchecked(&abc_axes);
    let (na, nb) = (a.len(), b.len());
    // Positions inside the (A, B, C) ordering.
    let pos_ac: Vec<usize> = (0..na).chain(na + nb..abc_axes.len()).collect();
    let pos_bc: Vec<usize> = (na..abc_axes.len()).collect();
    let pos_c: Vec<usize> = (na + nb..abc_axes.len()).collect();
    let ac = abc.marginal_unchecked(&pos_ac);
    let bc = abc.marginal_unchecked(&pos_bc);
    let cm = if pos_c.is_empty() {
        JointPmf { cards: vec![1], mass: vec![1.0] }
    } else {
        abc.marginal_unchecked(&pos_c)
    };
    let sub = |idx: &[usize], pos: &[usize], t: &JointPmf| -> f64 {
        if pos.is_empty() {
            return t.mass[0];
        }
        let flat = pos.iter().zip(&t.cards).fold(0, |acc, (&p, &card)| acc * card + idx[p]);
        t.mass[flat]
    };
    let mut idx = vec![0usize; abc.cards.len()];
    let mut total = 0.0;
    for &p in &abc.mass {
        if p > 0.0 {
            let p_ac = sub(&idx, &pos_ac, &ac);
            let p_bc = sub(&idx, &pos_bc, &bc);
            let p_c = sub(&idx, &pos_c, &cm);
            total += p * (p * p_c / (p_ac * p_bc)).ln();
        }
        for ax in (0..idx.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < abc.cards[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    Ok(clamp_nonneg(total))
}

/// `D(p || q)` in nats; `+inf` when `p` has mass where `q` has none.
pub fn kl_divergence(p: &JointPmf, q: &JointPmf) -> Result<f64> {
    if p.cards != q.cards {
        return Err(usage(format!("kl between shapes {:?} and {:?}", p.cards, q.cards)));
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.mass.iter().zip(&q.mass) {
        if pi <= PROB_FLOOR {
            continue;
        }
        if qi <= PROB_FLOOR {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(clamp_nonneg(total))
}

/// Mixture-of-products marginal `sum_z P(z) prod_i P(x_i | z)`.
pub fn compose_joint(prior_z: &Pmf, decoders: &[CondPmf]) -> Result<JointPmf> {
    if decoders.is_empty() {
        return Err(usage("compose_joint needs at least one decoder"));
    }
    if let Some(d) = decoders.iter().find(|d| d.given_card() != prior_z.card()) {
        return Err(usage(format!(
            "decoder conditioned on |Z| = {} but the prior has |Z| = {}",
            d.given_card(),
            prior_z.card()
        )));
    }
    let cards: Vec<usize> = decoders.iter().map(CondPmf::out_card).collect();
    let len: usize = cards.iter().product();
    let mut mass = vec![0.0; len];
    for (z, &pz) in prior_z.mass().iter().enumerate() {
        if pz == 0.0 {
            continue;
        }
        let mut block = vec![pz];
        for d in decoders {
            let row = d.row(z);
            block = block.iter().flat_map(|&a| row.iter().map(move |&b| a * b)).collect();
        }
        for (m, b) in mass.iter_mut().zip(block) {
            *m += b;
        }
    }
    JointPmf::new(cards, mass)
}

/// Full joint `P(X^V, Z) = P(X^V) P(Z | X^V)`, with `Z` appended as the last axis.
pub fn encoder_joint(joint_x: &JointPmf, encoder: &CondPmf) -> Result<JointPmf> {
    if encoder.given_card() != joint_x.len() {
        return Err(usage(format!(
            "encoder conditions on {} observations but the joint has {} cells",
            encoder.given_card(),
            joint_x.len()
        )));
    }
    let zc = encoder.out_card();
    let mut mass = Vec::with_capacity(joint_x.len() * zc);
    for (x, &px) in joint_x.mass().iter().enumerate() {
        mass.extend(encoder.row(x).iter().map(|&e| px * e));
    }
    let mut cards = joint_x.cards().to_vec();
    cards.push(zc);
    JointPmf::new(cards, mass)
}
