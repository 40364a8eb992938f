//! Backward dynamic programming over the tree levels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tree::Tree;

const NO_CONTROL: u32 = u32::MAX;

/// `V^n` on every node together with the minimizing control index.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    values: Vec<Vec<f64>>,
    argmin: Vec<Vec<u32>>,
}

impl ValueTable {
    pub fn n_levels(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.values[n][i]
    }

    pub fn level_values(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    /// Minimizing control at node `i` of level `n < N̄`; `None` for dead ends.
    pub fn argmin(&self, n: usize, i: usize) -> Option<usize> {
        let a = self.argmin[n][i];
        (a != NO_CONTROL).then_some(a as usize)
    }
}

/// `V^N̄ = g`, then `V^n(ζ) = min_j { h ℓ(ζ, u_j, t_n) + e^{-λh} V^{n+1}(succ(ζ, j)) }`
/// over the controls with an admissible successor. Ties go to the lowest
/// control index; nodes without successors get `+∞`.
pub fn backward_sweep(tr: &Tree) -> Result<ValueTable> {
    let meta = tr.meta();
    let p = &meta.problem;
    let tg = &meta.time_grid;
    let grid = &meta.controls;
    let h = tg.h();
    let disc = tg.discount_factor(p.discount());
    let last = tr.n_levels() - 1;

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); tr.n_levels()];
    let mut argmin: Vec<Vec<u32>> = vec![Vec::new(); last];
    values[last] = (0..tr.level_len(last)).map(|i| p.terminal_cost(tr.state(last, i))).collect();

    for n in (0..last).rev() {
        let t = tg.time(n);
        let next = &values[n + 1];
        let (v, a): (Vec<f64>, Vec<u32>) = (0..tr.level_len(n))
            .into_par_iter()
            .map(|i| {
                let x = tr.state(n, i);
                let mut best = f64::INFINITY;
                let mut arg = NO_CONTROL;
                for (j, u) in grid.iter().enumerate() {
                    if let Some(k) = tr.successor_unchecked(n, i, j) {
                        let score = h * p.running_cost(x, u, t) + disc * next[k];
                        if score < best {
                            best = score;
                            arg = j as u32;
                        }
                    }
                }
                (best, arg)
            })
            .unzip();
        values[n] = v;
        argmin[n] = a;
    }

    if !values[0][0].is_finite() {
        return Err(Error::NoAdmissiblePolicy);
    }
    Ok(ValueTable { values, argmin })
}

/// `V^0` at the root.
pub fn value_at_root(vt: &ValueTable) -> f64 {
    vt.values[0][0]
}
