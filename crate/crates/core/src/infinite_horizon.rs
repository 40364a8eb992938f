//! Constrained infinite-horizon value iteration on a uniform grid.
//!
//! `T v(x) = min_{u ∈ U_h(x)} { β v(x + h f(x, u)) + h ℓ(x, u) }` with
//! `β = 1 - λh`, where `U_h(x)` keeps the controls whose foot point is
//! admissible and inside the grid box. Dynamics and costs are evaluated at the
//! problem's start time.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_sl::{bellman_step, UniformGrid};
use crate::problem::{ConstraintSet, ControlGrid, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VIParams {
    pub h: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl VIParams {
    pub fn new(h: f64, tol: f64, max_iters: usize) -> Self {
        VIParams { h, tol, max_iters }
    }

    /// `β = 1 - λh`.
    pub fn beta(&self, lambda: f64) -> f64 {
        1.0 - lambda * self.h
    }

    fn validate(&self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("value iteration needs λ > 0, got {lambda}")));
        }
        if !(self.h > 0.0) || lambda * self.h > 1.0 {
            return Err(Error::InvalidParameter(format!("need 0 < h <= 1/λ, got h = {} with λ = {lambda}", self.h)));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidParameter("tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VIResult {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `‖v_{k+1} - v_k‖∞` for every iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// One application of `T` at every grid node; masked nodes and nodes with
/// an empty `U_h(x)` get `+∞`.
pub fn apply_t(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    ug: &UniformGrid,
    v: &[f64],
    params: &VIParams,
) -> Result<Vec<f64>> {
    params.validate(p.discount())?;
    bellman_step(p, c, grid, ug, v, p.t_start(), params.h, params.beta(p.discount()))
}

/// Sup-norm distance between two grid functions. Nodes infinite in both are
/// ignored; a node finite in only one of them makes the distance infinite.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x.is_finite(), y.is_finite()) {
            (true, true) => (x - y).abs(),
            (false, false) => 0.0,
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Sup norm over the finite entries.
pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().filter(|x| x.is_finite()).fold(0.0, |m, x| m.max(x.abs()))
}

/// Iterates `v_{k+1} = T v_k` from `v_0 = 0` until successive iterates are
/// within `tol` in sup norm or `max_iters` is reached.
pub fn value_iterate(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    ug: &UniformGrid,
    params: &VIParams,
) -> Result<VIResult> {
    params.validate(p.discount())?;
    let mut v: Vec<f64> = ug.mask().iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let mut residuals = Vec::new();
    for k in 1..=params.max_iters {
        let next = apply_t(p, c, grid, ug, &v, params)?;
        let r = sup_distance(&next, &v);
        residuals.push(r);
        v = next;
        if r <= params.tol {
            return Ok(VIResult { values: v, iterations: k, residuals, converged: true });
        }
    }
    Ok(VIResult { values: v, iterations: params.max_iters, residuals, converged: false })
}

/// `L_ℓ δ / (λ - L_f) + 2 L_ℓ Δx`: the continuity modulus bound plus the
/// interpolation slack of the grid.
pub fn modulus_bound(p: &ProblemSpec, delta: f64, dx: f64) -> Result<f64> {
    let (l_f, l_ell) = lipschitz_pair(p)?;
    Ok(l_ell * delta / (p.discount() - l_f) + 2.0 * l_ell * dx)
}

fn lipschitz_pair(p: &ProblemSpec) -> Result<(f64, f64)> {
    let b = p.bounds().ok_or_else(|| Error::HypothesisViolated("problem carries no Lipschitz bounds".into()))?;
    let (Some(l_f), Some(l_ell)) = (b.l_f, b.l_ell) else {
        return Err(Error::HypothesisViolated("L_f and L_ℓ must both be known".into()));
    };
    if !(p.discount() > l_f) {
        return Err(Error::HypothesisViolated(format!("need λ > L_f, got λ = {} and L_f = {l_f}", p.discount())));
    }
    Ok((l_f, l_ell))
}

/// Largest `|v(x) - v(y)|` over pairs of admissible nodes with finite values
/// and `|x - y| ≤ δ` (all such pairs are visited).
pub fn estimate_modulus(p: &ProblemSpec, values: &[f64], ug: &UniformGrid, delta: f64) -> Result<f64> {
    lipschitz_pair(p)?;
    if values.len() != ug.n_nodes() {
        return Err(Error::DimensionMismatch { expected: ug.n_nodes(), got: values.len() });
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("δ must be >= 0, got {delta}")));
    }
    let d = ug.dim();
    let reach = (delta / ug.dx() * (1.0 + 1e-12)).floor() as i64;
    let points: Vec<i64> = ug.points_per_axis().iter().map(|&n| n as i64).collect();
    let mut strides = vec![1i64; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * points[k + 1];
    }
    let mask = ug.mask();
    let best = (0..ug.n_nodes())
        .into_par_iter()
        .filter(|&i| mask[i] && values[i].is_finite())
        .map(|i| {
            let xi = ug.node(i);
            let idx: Vec<i64> = ug.multi_index(i).into_iter().map(|v| v as i64).collect();
            let mut off = vec![-reach; d];
            let mut best = 0.0f64;
            loop {
                let mut j = 0i64;
                let mut inside = true;
                for k in 0..d {
                    let c = idx[k] + off[k];
                    inside &= c >= 0 && c < points[k];
                    j += c * strides[k];
                }
                if inside {
                    let j = j as usize;
                    if j > i && mask[j] && values[j].is_finite() {
                        let xj = ug.node(j);
                        let dist = xi.iter().zip(&xj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                        if dist <= delta {
                            best = best.max((values[i] - values[j]).abs());
                        }
                    }
                }
                let mut k = 0;
                loop {
                    if k == d {
                        return best;
                    }
                    if off[k] < reach {
                        off[k] += 1;
                        break;
                    }
                    off[k] = -reach;
                    k += 1;
                }
            }
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}
