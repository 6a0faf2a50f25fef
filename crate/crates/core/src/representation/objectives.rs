//! Entropy-form objectives over an encoder in negative-log coordinates.
//!
//! Values and gradients here treat the encoder values `v[x, z] = -ln P(z|x)`
//! as free real coordinates: every probability is `exp(-v)` without
//! renormalization, and the view marginals `P(x1)`, `P(x2)` come from the
//! data. On normalized encoders these agree with the textbook quantities.
//!
//! A problem works on a subset of encoder rows, its *cells*. Rows of
//! observations with zero mass contribute nothing to any objective, so the
//! solvers drop them; [`TwoViewProblem::dense`] keeps every row.

use crate::error::{usage, Result};
use crate::info::JointPmf;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    /// Row index in the full encoder.
    row: usize,
    a: usize,
    b: usize,
    px: f64,
}

/// Precomputed data terms for a two-view problem.
#[derive(Debug, Clone)]
pub struct TwoViewProblem {
    x_cards: [usize; 2],
    z_card: usize,
    cells: Vec<Cell>,
    px1: Vec<f64>,
    px2: Vec<f64>,
}

/// The four entropies of the representation Lagrangian, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyTerms {
    pub h_z: f64,
    pub h_z_given_x: f64,
    pub h_z_given_x1: f64,
    pub h_z_given_x2: f64,
}

impl TwoViewProblem {
    /// Problem over the rows with positive mass.
    pub fn new(joint: &JointPmf, z_card: usize) -> Result<Self> {
        Self::build(joint, z_card, false)
    }

    /// Problem over every encoder row.
    pub fn dense(joint: &JointPmf, z_card: usize) -> Result<Self> {
        Self::build(joint, z_card, true)
    }

    fn build(joint: &JointPmf, z_card: usize, keep_zero: bool) -> Result<Self> {
        if joint.num_axes() != 2 {
            return Err(usage(format!("two-view problem needs a 2-axis joint, got {}", joint.num_axes())));
        }
        if z_card == 0 {
            return Err(usage("|Z| must be positive"));
        }
        let (n1, n2) = (joint.cards()[0], joint.cards()[1]);
        let mass = joint.mass();
        let mut px1 = vec![0.0; n1];
        let mut px2 = vec![0.0; n2];
        let mut cells = Vec::new();
        for a in 0..n1 {
            for b in 0..n2 {
                let px = mass[a * n2 + b];
                px1[a] += px;
                px2[b] += px;
                if keep_zero || px > 0.0 {
                    cells.push(Cell { row: a * n2 + b, a, b, px });
                }
            }
        }
        Ok(Self { x_cards: [n1, n2], z_card, cells, px1, px2 })
    }

    pub fn z_card(&self) -> usize {
        self.z_card
    }

    pub fn x_cards(&self) -> [usize; 2] {
        self.x_cards
    }

    /// Length of a full encoder vector.
    pub fn dim(&self) -> usize {
        self.x_cards[0] * self.x_cards[1] * self.z_card
    }

    /// Length of the vectors the objective methods take.
    pub fn active_dim(&self) -> usize {
        self.cells.len() * self.z_card
    }

    pub fn max_cell_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.px).fold(0.0, f64::max)
    }

    pub(crate) fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(usage(format!("encoder has {} values, problem expects {}", v.len(), self.dim())));
        }
        Ok(())
    }

    /// Active rows of a full encoder vector.
    pub fn compress(&self, full: &[f64]) -> Vec<f64> {
        let zc = self.z_card;
        let mut out = Vec::with_capacity(self.active_dim());
        for c in &self.cells {
            out.extend_from_slice(&full[c.row * zc..(c.row + 1) * zc]);
        }
        out
    }

    /// Writes active rows back into a full encoder vector.
    pub fn expand_into(&self, active: &[f64], full: &mut [f64]) {
        let zc = self.z_card;
        for (k, c) in self.cells.iter().enumerate() {
            full[c.row * zc..(c.row + 1) * zc].copy_from_slice(&active[k * zc..(k + 1) * zc]);
        }
    }

    /// Weighted masses `P(x) exp(-v[x, z])`.
    fn weighted(&self, v: &[f64]) -> Vec<f64> {
        let zc = self.z_card;
        let mut w = vec![0.0; v.len()];
        for (k, c) in self.cells.iter().enumerate() {
            if c.px == 0.0 {
                continue;
            }
            for z in 0..zc {
                w[k * zc + z] = c.px * (-v[k * zc + z]).exp();
            }
        }
        w
    }

    /// `(m(z), m1(x1, z), m2(x2, z))` from the weighted masses.
    fn latent_marginals(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let zc = self.z_card;
        let [n1, n2] = self.x_cards;
        let mut mz = vec![0.0; zc];
        let mut m1 = vec![0.0; n1 * zc];
        let mut m2 = vec![0.0; n2 * zc];
        for (k, c) in self.cells.iter().enumerate() {
            for z in 0..zc {
                let m = w[k * zc + z];
                mz[z] += m;
                m1[c.a * zc + z] += m;
                m2[c.b * zc + z] += m;
            }
        }
        (mz, m1, m2)
    }

    fn neg_m_log(m: f64, norm: f64) -> f64 {
        if m > 0.0 {
            -m * (m / norm).ln()
        } else {
            0.0
        }
    }

    pub fn entropy_terms(&self, v: &[f64]) -> EntropyTerms {
        let zc = self.z_card;
        let w = self.weighted(v);
        let h_z_given_x = w.iter().zip(v).map(|(&m, &val)| m * val).sum();
        let (mz, m1, m2) = self.latent_marginals(&w);
        let h_z = mz.iter().map(|&m| Self::neg_m_log(m, 1.0)).sum();
        let cond = |m: &[f64], marg: &[f64]| -> f64 {
            marg.iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| (0..zc).map(|z| Self::neg_m_log(m[a * zc + z], p)).sum::<f64>())
                .sum()
        };
        EntropyTerms {
            h_z,
            h_z_given_x,
            h_z_given_x1: cond(&m1, &self.px1),
            h_z_given_x2: cond(&m2, &self.px2),
        }
    }

    /// `F(p) = -(1 + gamma) H(Z | X1, X2)`.
    pub fn f_value(&self, p: &[f64], gamma: f64) -> f64 {
        let w = self.weighted(p);
        -(1.0 + gamma) * w.iter().zip(p).map(|(&m, &val)| m * val).sum::<f64>()
    }

    pub fn f_grad(&self, p: &[f64], gamma: f64, out: &mut [f64]) {
        let zc = self.z_card;
        for (k, c) in self.cells.iter().enumerate() {
            for z in 0..zc {
                let i = k * zc + z;
                out[i] = if c.px == 0.0 { 0.0 } else { -(1.0 + gamma) * c.px * (-p[i]).exp() * (1.0 - p[i]) };
            }
        }
    }

    /// `G(q) = (1 - gamma) H(Z) + gamma H(Z | X1) + gamma H(Z | X2)`.
    pub fn g_value(&self, q: &[f64], gamma: f64) -> f64 {
        let t = self.entropy_terms(q);
        (1.0 - gamma) * t.h_z + gamma * (t.h_z_given_x1 + t.h_z_given_x2)
    }

    pub fn g_grad(&self, q: &[f64], gamma: f64, out: &mut [f64]) {
        let zc = self.z_card;
        let w = self.weighted(q);
        let (mz, m1, m2) = self.latent_marginals(&w);
        let log_or_zero = |m: f64, norm: f64| if m > 0.0 { (m / norm).ln() } else { 0.0 };
        let lz: Vec<f64> = mz.iter().map(|&m| log_or_zero(m, 1.0)).collect();
        for (k, c) in self.cells.iter().enumerate() {
            for z in 0..zc {
                let i = k * zc + z;
                out[i] = if w[i] == 0.0 {
                    0.0
                } else {
                    let l1 = log_or_zero(m1[c.a * zc + z], self.px1[c.a]);
                    let l2 = log_or_zero(m2[c.b * zc + z], self.px2[c.b]);
                    w[i] * ((1.0 - gamma) * (lz[z] + 1.0) + gamma * (l1 + 1.0) + gamma * (l2 + 1.0))
                };
            }
        }
    }

    /// `L_gamma = F + G` on a single encoder.
    pub fn lagrangian_value(&self, v: &[f64], gamma: f64) -> f64 {
        let t = self.entropy_terms(v);
        (1.0 - gamma) * t.h_z - (1.0 + gamma) * t.h_z_given_x + gamma * (t.h_z_given_x1 + t.h_z_given_x2)
    }

    pub fn lagrangian_grad(&self, v: &[f64], gamma: f64, out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        self.f_grad(v, gamma, out);
        self.g_grad(v, gamma, &mut tmp);
        out.iter_mut().zip(tmp).for_each(|(o, t)| *o += t);
    }
}
