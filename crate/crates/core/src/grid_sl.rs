//! Fixed-grid semi-Lagrangian baseline.
//!
//! Values live on the nodes of a uniform Cartesian grid and are read off at
//! foot points by multilinear interpolation. A foot point whose interpolation
//! stencil touches an inadmissible node (or a node with value `+∞`) scores
//! `+∞`, so placeholder values stored on masked nodes never leak into finite
//! results.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feedback::{greedy_rollout, Trajectory};
use crate::problem::{euler_into, ConstraintSet, ControlGrid, ProblemSpec, TimeGrid};

/// Relative cell offsets closer than this to a node count as on the node.
const SNAP: f64 = 1e-9;

/// Uniform grid with the same spacing on every axis (up to round-off); the
/// first axis varies slowest. End nodes sit exactly on `lo` and `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGrid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    dx: f64,
    step: Vec<f64>,
    points: Vec<usize>,
    strides: Vec<usize>,
    mask: Vec<bool>,
}

impl UniformGrid {
    /// `hi - lo` must be an integer multiple of `dx` on every axis.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, dx: f64, c: &ConstraintSet) -> Result<Self> {
        let d = lo.len();
        if d == 0 || hi.len() != d {
            return Err(Error::DimensionMismatch { expected: d.max(1), got: hi.len() });
        }
        if c.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {dx}")));
        }
        let mut points = Vec::with_capacity(d);
        for k in 0..d {
            let span = hi[k] - lo[k];
            if !span.is_finite() || !(span > 0.0) {
                return Err(Error::InvalidParameter(format!("grid axis {k} needs finite lo < hi")));
            }
            let cells = span / dx;
            let rounded = cells.round();
            if (cells - rounded).abs() > 1e-6 * rounded.max(1.0) {
                return Err(Error::InvalidParameter(format!(
                    "axis {k}: span {span} is not a multiple of dx = {dx}"
                )));
            }
            points.push(rounded as usize + 1);
        }
        let mut strides = vec![1; d];
        for k in (0..d - 1).rev() {
            strides[k] = strides[k + 1] * points[k + 1];
        }
        let total: usize = points.iter().product();
        let step = (0..d).map(|k| (hi[k] - lo[k]) / (points[k] - 1) as f64).collect();
        let mut g = UniformGrid { lo, hi, dx, step, points, strides, mask: Vec::new() };
        let mut x = vec![0.0; d];
        g.mask = (0..total)
            .map(|i| {
                g.node_into(i, &mut x);
                c.contains(&x)
            })
            .collect();
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn points_per_axis(&self) -> &[usize] {
        &self.points
    }

    pub fn n_nodes(&self) -> usize {
        self.mask.len()
    }

    /// `true` where the node is admissible.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        self.strides.iter().zip(&self.points).map(|(s, p)| (i / s) % p).collect()
    }

    fn node_into(&self, i: usize, out: &mut [f64]) {
        for k in 0..self.dim() {
            let idx = (i / self.strides[k]) % self.points[k];
            let s = idx as f64 / (self.points[k] - 1) as f64;
            out[k] = self.lo[k] * (1.0 - s) + self.hi[k] * s;
        }
    }

    pub fn node(&self, i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_into(i, &mut x);
        x
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let slack = 1e-9 * self.dx;
        x.iter().enumerate().all(|(k, &v)| v >= self.lo[k] - slack && v <= self.hi[k] + slack)
    }

    /// Multilinear interpolation of nodal `values` at `x`; `None` outside the
    /// box. Any stencil corner with positive weight that is masked or
    /// non-finite makes the result `+∞`.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        debug_assert_eq!(values.len(), self.n_nodes());
        if !self.contains(x) {
            return None;
        }
        let d = self.dim();
        let mut base = 0;
        let mut frac = [0.0f64; 8];
        let mut frac_vec;
        let frac: &mut [f64] = if d <= 8 {
            &mut frac[..d]
        } else {
            frac_vec = vec![0.0; d];
            &mut frac_vec
        };
        for k in 0..d {
            let s = (x[k] - self.lo[k]) / self.step[k];
            let cell = (s.floor().max(0.0) as usize).min(self.points[k] - 2);
            // Round-off weights would otherwise let a masked neighbor of an
            // exact lattice foot point poison it.
            let f = (s - cell as f64).clamp(0.0, 1.0);
            frac[k] = if f < SNAP {
                0.0
            } else if f > 1.0 - SNAP {
                1.0
            } else {
                f
            };
            base += cell * self.strides[k];
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut i = base;
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    i += self.strides[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w == 0.0 {
                continue;
            }
            let v = values[i];
            if !self.mask[i] || !v.is_finite() {
                return Some(f64::INFINITY);
            }
            acc += w * v;
        }
        Some(acc)
    }
}

/// `V^n` on the grid nodes for every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValue {
    levels: Vec<Vec<f64>>,
}

impl GridValue {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }
}

/// One Bellman update on every node:
/// `min_u { h ℓ(x, u, t) + factor · I[next](x + h f(x, u, t)) }` over
/// controls whose foot point is admissible and inside the box. Masked nodes
/// and nodes without a usable control receive `+∞`.
#[allow(clippy::too_many_arguments)]
pub fn bellman_step(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    ug: &UniformGrid,
    next: &[f64],
    t: f64,
    h: f64,
    factor: f64,
) -> Result<Vec<f64>> {
    bellman_step_with(p, c, grid, ug, next, t, h, factor, f64::INFINITY)
}

#[allow(clippy::too_many_arguments)]
fn bellman_step_with(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    ug: &UniformGrid,
    next: &[f64],
    t: f64,
    h: f64,
    factor: f64,
    sentinel: f64,
) -> Result<Vec<f64>> {
    if next.len() != ug.n_nodes() {
        return Err(Error::DimensionMismatch { expected: ug.n_nodes(), got: next.len() });
    }
    if grid.dim() != p.dim_control() || ug.dim() != p.dim_state() {
        return Err(Error::DimensionMismatch { expected: p.dim_control(), got: grid.dim() });
    }
    let d = ug.dim();
    (0..ug.n_nodes())
        .into_par_iter()
        .map_init(
            || (vec![0.0; d], vec![0.0; d]),
            |(x, foot), i| {
                if !ug.mask[i] {
                    return Ok(sentinel);
                }
                ug.node_into(i, x);
                let mut best = f64::INFINITY;
                for u in grid.iter() {
                    euler_into(p, x, u, t, h, foot)?;
                    if !c.contains(foot) {
                        continue;
                    }
                    let Some(v) = ug.interpolate(next, foot) else { continue };
                    let score = h * p.running_cost(x, u, t) + factor * v;
                    if score < best {
                        best = score;
                    }
                }
                Ok(best)
            },
        )
        .collect()
}

/// Backward semi-Lagrangian sweep from `V^N = g`.
pub fn solve_grid(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    tg: &TimeGrid,
    ug: &UniformGrid,
) -> Result<GridValue> {
    solve_grid_with(p, c, grid, tg, ug, f64::INFINITY)
}

fn solve_grid_with(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    tg: &TimeGrid,
    ug: &UniformGrid,
    sentinel: f64,
) -> Result<GridValue> {
    tg.check_discount(p.discount())?;
    if ug.dim() != p.dim_state() || c.dim() != p.dim_state() {
        return Err(Error::DimensionMismatch { expected: p.dim_state(), got: ug.dim() });
    }
    let n_steps = tg.n_steps();
    let disc = tg.discount_factor(p.discount());
    let mut levels = vec![Vec::new(); n_steps + 1];
    levels[n_steps] = (0..ug.n_nodes())
        .into_par_iter()
        .map(|i| if ug.mask[i] { p.terminal_cost(&ug.node(i)) } else { sentinel })
        .collect();
    for n in (0..n_steps).rev() {
        levels[n] = bellman_step_with(p, c, grid, ug, &levels[n + 1], tg.time(n), tg.h(), disc, sentinel)?;
    }
    Ok(GridValue { levels })
}

/// Multilinear read-out of `V^n` at `x`.
pub fn query_grid_value(gv: &GridValue, ug: &UniformGrid, x: &[f64], n: usize) -> Result<f64> {
    if x.len() != ug.dim() {
        return Err(Error::DimensionMismatch { expected: ug.dim(), got: x.len() });
    }
    if n >= gv.n_levels() {
        return Err(Error::OutOfRange(format!("level {n} of {}", gv.n_levels())));
    }
    ug.interpolate(gv.level(n), x).ok_or_else(|| Error::OutOfRange(format!("{x:?} lies outside the grid box")))
}

/// Greedy feedback with `V^{n+1}` read off the grid, optionally penalizing
/// control changes by `h γ |u - u*_{n-1}|²`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_grid_feedback(
    p: &ProblemSpec,
    c: &ConstraintSet,
    controls: &ControlGrid,
    tg: &TimeGrid,
    ug: &UniformGrid,
    gv: &GridValue,
    x0: &[f64],
    gamma: Option<f64>,
) -> Result<Trajectory> {
    p.check_state(x0)?;
    if !c.is_admissible(x0)? {
        return Err(Error::InadmissibleRoot(x0.to_vec()));
    }
    if !ug.contains(x0) {
        return Err(Error::OutOfRange(format!("initial state {x0:?} lies outside the grid box")));
    }
    if gv.n_levels() != tg.n_steps() + 1 {
        return Err(Error::DimensionMismatch { expected: tg.n_steps() + 1, got: gv.n_levels() });
    }
    let gamma = gamma.unwrap_or(0.0);
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("inertia weight must be finite and >= 0, got {gamma}")));
    }
    greedy_rollout(p, c, tg, controls, gamma, x0, |n, y| {
        Ok(ug.interpolate(gv.level(n + 1), y).unwrap_or(f64::INFINITY))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(dx: f64) -> UniformGrid {
        UniformGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], dx, &ConstraintSet::unbounded(2)).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = unit_square(0.25);
        assert_eq!(g.points_per_axis(), &[5, 5]);
        assert_eq!(g.n_nodes(), 25);
        assert_eq!(g.node(7), vec![0.25, 0.5]);
        assert_eq!(g.multi_index(7), vec![1, 2]);
        assert!(UniformGrid::new(vec![0.0], vec![1.0], 0.3, &ConstraintSet::unbounded(1)).is_err());
    }

    #[test]
    fn mask_follows_constraints() {
        let c = ConstraintSet::new(vec![0.0, 0.0], vec![0.5, 1.0]).unwrap();
        let g = UniformGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.25, &c).unwrap();
        assert_eq!(g.mask().iter().filter(|&&m| m).count(), 15);
    }

    #[test]
    fn interpolation_rules() {
        let g = unit_square(0.5);
        let mut v: Vec<f64> = (0..9).map(|i| i as f64).collect();
        assert_eq!(g.interpolate(&v, &[0.5, 0.5]), Some(4.0));
        // Midpoint of the edge between nodes 0 and 1.
        assert_eq!(g.interpolate(&v, &[0.0, 0.25]), Some(0.5));
        assert_eq!(g.interpolate(&v, &[1.5, 0.0]), None);
        v[4] = f64::INFINITY;
        assert_eq!(g.interpolate(&v, &[0.25, 0.25]), Some(f64::INFINITY));
        // Zero weight on the infinite corner.
        assert_eq!(g.interpolate(&v, &[0.0, 0.0]), Some(0.0));
    }

    #[test]
    fn trivial_values() {
        let p = ProblemSpec::builder(2, 1).dynamics(|_, u, _, o| o.fill(u[0])).build().unwrap();
        let c = ConstraintSet::unbounded(2);
        let ug = unit_square(0.125);
        let tg = TimeGrid::from_steps(0.0, 0.5, 5).unwrap();
        let grid = ControlGrid::scalar(&[-1.0, 0.0, 1.0]).unwrap();
        let gv = solve_grid(&p, &c, &grid, &tg, &ug).unwrap();
        assert!((0..gv.n_levels()).all(|n| gv.level(n).iter().all(|&v| v == 0.0)));

        let q = ProblemSpec::builder(2, 1)
            .dynamics(|_, _, _, o| o.fill(0.0))
            .running_cost(|_, _, _| 1.0)
            .build()
            .unwrap();
        let gv = solve_grid(&q, &c, &grid, &tg, &ug).unwrap();
        assert!(gv.level(0).iter().all(|&v| (v - 5.0 * tg.h()).abs() < 1e-14));
        assert!((query_grid_value(&gv, &ug, &[0.3, 0.7], 0).unwrap() - 0.5).abs() < 1e-14);
        assert!(query_grid_value(&gv, &ug, &[1.3, 0.7], 0).is_err());

        let tr = synthesize_grid_feedback(&q, &c, &grid, &tg, &ug, &gv, &[0.3, 0.7], None).unwrap();
        assert!(tr.states.iter().all(|x| x == &[0.3, 0.7]));
    }

    #[test]
    fn sentinel_never_leaks() {
        let p = ProblemSpec::builder(2, 2)
            .dynamics(|_, u, _, o| o.copy_from_slice(u))
            .running_cost(|x, _, _| x[0] + 2.0 * x[1])
            .terminal_cost(|x| x[0] * x[0])
            .build()
            .unwrap();
        let c = ConstraintSet::new(vec![0.0, 0.0], vec![1.0, 1.0])
            .unwrap()
            .with_obstacle(crate::problem::Obstacle::new(crate::problem::Sense::Leq, |x| {
                (x[0] - 0.5).abs().max((x[1] - 0.5).abs()) - 0.2
            }));
        let ug = UniformGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.05, &c).unwrap();
        let tg = TimeGrid::from_steps(0.0, 0.3, 6).unwrap();
        let grid = ControlGrid::square9();
        let a = solve_grid_with(&p, &c, &grid, &tg, &ug, f64::INFINITY).unwrap();
        let b = solve_grid_with(&p, &c, &grid, &tg, &ug, 1e300).unwrap();
        for n in 0..a.n_levels() {
            for (x, y) in a.level(n).iter().zip(b.level(n)) {
                if x.is_finite() || y.abs() < 1e300 {
                    assert_eq!(x, y);
                }
            }
        }
    }

    #[test]
    fn foot_points_outside_box_are_excluded() {
        // Only u = +1 moves; from the right edge it leaves the box.
        let p = ProblemSpec::builder(1, 1)
            .dynamics(|_, u, _, o| o[0] = u[0])
            .running_cost(|_, u, _| 1.0 - u[0])
            .build()
            .unwrap();
        let c = ConstraintSet::unbounded(1);
        let ug = UniformGrid::new(vec![0.0], vec![1.0], 0.25, &c).unwrap();
        let tg = TimeGrid::from_step(0.0, 0.25, 0.25).unwrap();
        let gv = solve_grid(&p, &c, &ControlGrid::scalar(&[0.0, 1.0]).unwrap(), &tg, &ug).unwrap();
        assert_eq!(gv.level(0)[0], 0.0);
        assert_eq!(gv.level(0)[4], 0.25);
    }
}
