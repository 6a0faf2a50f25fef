//! Fixed-step projected gradient descent in negative-log coordinates.

use crate::error::{Error, Result};
use crate::model::{ChangeMeasure, NegLogSimplex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOutcome {
    pub iterations: usize,
    /// Norm of the last projected step; the fixed-point residual of the loop.
    pub last_step: f64,
}

pub(crate) fn l2(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Runs `x <- project(x - step * pull_back(grad(x)))` until the step norm,
/// taken in `measure` coordinates, drops to `tol` or `max_iters` steps were
/// taken.
pub(crate) fn projected_descent<G>(
    x: &mut NegLogSimplex,
    step: f64,
    tol: f64,
    max_iters: usize,
    measure: ChangeMeasure,
    mut grad: G,
) -> Result<InnerOutcome>
where
    G: FnMut(&[f64], &mut [f64]),
{
    let n = x.values().len();
    let mut g = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut last_step = 0.0;
    for it in 0..max_iters {
        grad(x.values(), &mut g);
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { index: it, message: format!("non-finite gradient in coordinate {i}") });
        }
        x.pull_back(&mut g);
        prev.copy_from_slice(x.values());
        x.values_mut().iter_mut().zip(&g).for_each(|(v, gi)| *v -= step * gi);
        x.renormalize();
        last_step = measure.distance(x.values(), &prev);
        if last_step <= tol {
            return Ok(InnerOutcome { iterations: it + 1, last_step });
        }
    }
    Ok(InnerOutcome { iterations: max_iters, last_step })
}
