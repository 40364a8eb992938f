//! Optimal trajectories from a solved tree.
//!
//! `TreePath` follows the stored minimizers from node to node. The extended
//! modes re-optimize at every step over a (usually richer) control set `Ũ`,
//! reading `V^{n+1}` off a scattered interpolant of the next tree level, and
//! optionally penalize control changes by `h γ |u - u*_{n-1}|²`.

use crate::error::{Error, Result};
use crate::problem::{euler_into, ConstraintSet, ControlGrid, ProblemSpec, TimeGrid};
use crate::scattered_interp::{build_interpolant, InterpMethod, ScatteredInterpolant};
use crate::tree::Tree;
use crate::tree_dp::ValueTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackMode {
    #[default]
    TreePath,
    Extended,
    ExtendedInertia,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackParams {
    pub mode: FeedbackMode,
    /// `Ũ`; unused in `TreePath` mode.
    pub extended_controls: Option<ControlGrid>,
    pub inertia_gamma: f64,
}

impl FeedbackParams {
    pub fn tree_path() -> Self {
        FeedbackParams { mode: FeedbackMode::TreePath, extended_controls: None, inertia_gamma: 0.0 }
    }

    pub fn extended(controls: ControlGrid) -> Self {
        FeedbackParams { mode: FeedbackMode::Extended, extended_controls: Some(controls), inertia_gamma: 0.0 }
    }

    pub fn inertia(controls: ControlGrid, gamma: f64) -> Self {
        FeedbackParams { mode: FeedbackMode::ExtendedInertia, extended_controls: Some(controls), inertia_gamma: gamma }
    }

    /// Penalty weight actually applied (zero outside inertia mode).
    pub fn gamma(&self) -> f64 {
        match self.mode {
            FeedbackMode::ExtendedInertia => self.inertia_gamma,
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.inertia_gamma >= 0.0) || !self.inertia_gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("inertia weight must be finite and >= 0, got {}", self.inertia_gamma)));
        }
        if self.mode != FeedbackMode::TreePath && self.extended_controls.is_none() {
            return Err(Error::InvalidParameter("extended feedback needs a control set".into()));
        }
        Ok(())
    }
}

/// A discrete trajectory with its left-endpoint cost breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    /// `h ℓ(y_n, u_n, t_n) e^{-λ n h}` for each step.
    pub running_cost_terms: Vec<f64>,
    /// Discounted terminal cost `e^{-λ N h} g(y_N)`.
    pub terminal_term: f64,
    pub total_cost: f64,
    /// Per state; all true when no constraint set was supplied.
    pub admissible: Vec<bool>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.controls.len()
    }

    pub fn all_admissible(&self) -> bool {
        self.admissible.iter().all(|&a| a)
    }

    /// Number of steps `n ≥ 1` with `u_n ≠ u_{n-1}`.
    pub fn switches(&self) -> usize {
        count_switches(&self.controls)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }
}

pub fn count_switches(controls: &[Vec<f64>]) -> usize {
    controls.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Builds the cost breakdown for a state/control path.
fn assemble(
    p: &ProblemSpec,
    c: Option<&ConstraintSet>,
    tg: &TimeGrid,
    states: Vec<Vec<f64>>,
    controls: Vec<Vec<f64>>,
) -> Trajectory {
    let h = tg.h();
    let disc = tg.discount_factor(p.discount());
    let mut weight = 1.0;
    let mut terms = Vec::with_capacity(controls.len());
    for (n, u) in controls.iter().enumerate() {
        terms.push(h * p.running_cost(&states[n], u, tg.time(n)) * weight);
        weight *= disc;
    }
    let terminal_term = weight * p.terminal_cost(states.last().unwrap());
    let total_cost = terms.iter().sum::<f64>() + terminal_term;
    let admissible = match c {
        Some(c) => states.iter().map(|x| c.contains(x)).collect(),
        None => vec![true; states.len()],
    };
    Trajectory {
        times: (0..states.len()).map(|n| tg.time(n)).collect(),
        states,
        controls,
        running_cost_terms: terms,
        terminal_term,
        total_cost,
        admissible,
    }
}

/// Rolls `x0` forward under `controls` and accumulates the discounted cost.
/// Admissibility is only recorded, never enforced.
pub fn evaluate_cost(
    p: &ProblemSpec,
    c: Option<&ConstraintSet>,
    tg: &TimeGrid,
    x0: &[f64],
    controls: &[Vec<f64>],
) -> Result<Trajectory> {
    p.check_state(x0)?;
    if controls.len() != tg.n_steps() {
        return Err(Error::DimensionMismatch { expected: tg.n_steps(), got: controls.len() });
    }
    let h = tg.h();
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0.to_vec());
    for (n, u) in controls.iter().enumerate() {
        p.check_control(u)?;
        let mut next = vec![0.0; x0.len()];
        if euler_into(p, &states[n], u, tg.time(n), h, &mut next).is_err() {
            return Err(Error::NonFiniteState { step: n + 1 });
        }
        states.push(next);
    }
    Ok(assemble(p, c, tg, states, controls.to_vec()))
}

/// Follows the stored minimizers through the tree. States are tree nodes, so
/// with `ε > 0` they are merged representatives rather than exact Euler images.
pub fn synthesize_tree_path(tr: &Tree, vt: &ValueTable) -> Result<Trajectory> {
    if !vt.value(0, 0).is_finite() {
        return Err(Error::NoAdmissiblePolicy);
    }
    let meta = tr.meta();
    let last = tr.n_levels() - 1;
    let mut states = Vec::with_capacity(last + 1);
    let mut controls = Vec::with_capacity(last);
    let mut i = 0;
    states.push(tr.state(0, 0).to_vec());
    for n in 0..last {
        let j = vt.argmin(n, i).ok_or(Error::Stuck(n))?;
        i = tr.successor_unchecked(n, i, j).expect("argmin points at an admissible successor");
        controls.push(meta.controls.point(j).to_vec());
        states.push(tr.state(n + 1, i).to_vec());
    }
    Ok(assemble(&meta.problem, Some(&meta.constraints), &meta.time_grid, states, controls))
}

/// Interpolant of `V^n` over the finite-valued nodes of level `n`.
pub fn level_interpolant(tr: &Tree, vt: &ValueTable, n: usize) -> Result<ScatteredInterpolant> {
    let dim = tr.dim();
    let mut sites = Vec::new();
    let mut values = Vec::new();
    for (i, &v) in vt.level_values(n).iter().enumerate() {
        if v.is_finite() {
            sites.extend_from_slice(tr.state(n, i));
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::NoFiniteValues(n));
    }
    let idw = InterpMethod::Idw { k: dim + 1, power: 2.0 };
    if dim == 2 {
        match build_interpolant(dim, &sites, &values, InterpMethod::DelaunayLinear) {
            Err(Error::DegenerateSites(_)) => {}
            other => return other,
        }
    }
    build_interpolant(dim, &sites, &values, idw)
}

/// Greedy one-step lookahead over `controls`, starting at `x0`. `value_next(n, y)`
/// returns the approximation of `V^{n+1}(y)`; images that are inadmissible or
/// score `+∞` are skipped.
pub(crate) fn greedy_rollout<F>(
    p: &ProblemSpec,
    c: &ConstraintSet,
    tg: &TimeGrid,
    controls: &ControlGrid,
    gamma: f64,
    x0: &[f64],
    mut value_next: F,
) -> Result<Trajectory>
where
    F: FnMut(usize, &[f64]) -> Result<f64>,
{
    if controls.dim() != p.dim_control() {
        return Err(Error::DimensionMismatch { expected: p.dim_control(), got: controls.dim() });
    }
    let h = tg.h();
    let disc = tg.discount_factor(p.discount());
    let d = x0.len();
    let mut states = vec![x0.to_vec()];
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(tg.n_steps());
    let mut image = vec![0.0; d];
    let mut best_image = vec![0.0; d];
    let mut prev: Option<usize> = None;
    for n in 0..tg.n_steps() {
        let t = tg.time(n);
        let x = states[n].clone();
        let mut best = f64::INFINITY;
        let mut arg = None;
        for (j, u) in controls.iter().enumerate() {
            euler_into(p, &x, u, t, h, &mut image)?;
            if !c.contains(&image) {
                continue;
            }
            let mut score = h * p.running_cost(&x, u, t) + disc * value_next(n, &image)?;
            if let Some(k) = prev {
                if gamma > 0.0 {
                    let du: f64 = u.iter().zip(controls.point(k)).map(|(a, b)| (a - b) * (a - b)).sum();
                    score += h * gamma * du;
                }
            }
            if score < best {
                best = score;
                arg = Some(j);
                best_image.copy_from_slice(&image);
            }
        }
        let j = arg.ok_or(Error::Stuck(n))?;
        prev = Some(j);
        chosen.push(controls.point(j).to_vec());
        states.push(best_image.clone());
    }
    Ok(assemble(p, Some(c), tg, states, chosen))
}

/// Re-optimizes over `Ũ` at every step from the current (possibly off-tree)
/// state, using one interpolant per tree level.
pub fn synthesize_extended(tr: &Tree, vt: &ValueTable, fp: &FeedbackParams) -> Result<Trajectory> {
    fp.validate()?;
    if fp.mode == FeedbackMode::TreePath {
        return synthesize_tree_path(tr, vt);
    }
    if !vt.value(0, 0).is_finite() {
        return Err(Error::NoAdmissiblePolicy);
    }
    let meta = tr.meta();
    let controls = fp.extended_controls.as_ref().expect("validated");
    let mut cached: Option<(usize, ScatteredInterpolant)> = None;
    greedy_rollout(&meta.problem, &meta.constraints, &meta.time_grid, controls, fp.gamma(), &meta.x0, |n, y| {
        if cached.as_ref().map(|(m, _)| *m) != Some(n + 1) {
            cached = Some((n + 1, level_interpolant(tr, vt, n + 1)?));
        }
        Ok(cached.as_ref().unwrap().1.eval(y))
    })
}

/// Dispatches on `fp.mode`.
pub fn synthesize(tr: &Tree, vt: &ValueTable, fp: &FeedbackParams) -> Result<Trajectory> {
    match fp.mode {
        FeedbackMode::TreePath => synthesize_tree_path(tr, vt),
        _ => synthesize_extended(tr, vt, fp),
    }
}
