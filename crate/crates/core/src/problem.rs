//! Continuous control problem, constraint geometry and the discrete building
//! blocks (control grid, time grid, Euler step, admissible control sets) shared
//! by every solver in the crate.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `f(x, u, t)` written into the output slice.
pub type DynamicsFn = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;
/// `ℓ(x, u, t)`.
pub type RunningCostFn = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;
/// `g(x)`.
pub type TerminalCostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Level function `φ(x)` of an obstacle.
pub type LevelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Optional sup bounds and Lipschitz constants of the problem data.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProblemBounds {
    pub m_f: Option<f64>,
    pub m_ell: Option<f64>,
    pub m_g: Option<f64>,
    pub l_f: Option<f64>,
    pub l_ell: Option<f64>,
    pub l_g: Option<f64>,
}

impl ProblemBounds {
    fn validate(&self) -> Result<()> {
        let all = [
            ("M_f", self.m_f),
            ("M_ell", self.m_ell),
            ("M_g", self.m_g),
            ("L_f", self.l_f),
            ("L_ell", self.l_ell),
            ("L_g", self.l_g),
        ];
        for (name, v) in all {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Finite- or infinite-horizon optimal control problem
/// `ẏ = f(y, u, s)`, cost `∫ ℓ e^{-λ(s-t)} ds + g(y(T)) e^{-λ(T-t)}`.
#[derive(Clone)]
pub struct ProblemSpec {
    dim_state: usize,
    dim_control: usize,
    dynamics: DynamicsFn,
    running_cost: RunningCostFn,
    terminal_cost: TerminalCostFn,
    discount: f64,
    t_start: f64,
    t_end: f64,
    bounds: Option<ProblemBounds>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dim_state", &self.dim_state)
            .field("dim_control", &self.dim_control)
            .field("discount", &self.discount)
            .field("t_start", &self.t_start)
            .field("t_end", &self.t_end)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

pub struct ProblemBuilder {
    dim_state: usize,
    dim_control: usize,
    dynamics: Option<DynamicsFn>,
    running_cost: Option<RunningCostFn>,
    terminal_cost: Option<TerminalCostFn>,
    discount: f64,
    t_start: f64,
    t_end: f64,
    bounds: Option<ProblemBounds>,
}

impl ProblemBuilder {
    pub fn dynamics<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        self.dynamics = Some(Arc::new(f));
        self
    }

    pub fn running_cost<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        self.running_cost = Some(Arc::new(f));
        self
    }

    pub fn terminal_cost<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.terminal_cost = Some(Arc::new(f));
        self
    }

    pub fn discount(mut self, lambda: f64) -> Self {
        self.discount = lambda;
        self
    }

    pub fn horizon(mut self, t_start: f64, t_end: f64) -> Self {
        self.t_start = t_start;
        self.t_end = t_end;
        self
    }

    pub fn bounds(mut self, bounds: ProblemBounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        if self.dim_state == 0 || self.dim_control == 0 {
            return Err(Error::InvalidParameter("state and control dimensions must be positive".into()));
        }
        if !(self.discount >= 0.0) || !self.discount.is_finite() {
            return Err(Error::InvalidParameter(format!("discount must be finite and >= 0, got {}", self.discount)));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidParameter(format!(
                "horizon requires T > t, got t={} T={}",
                self.t_start, self.t_end
            )));
        }
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        let missing = |what: &str| Error::InvalidParameter(format!("{what} is required"));
        Ok(ProblemSpec {
            dim_state: self.dim_state,
            dim_control: self.dim_control,
            dynamics: self.dynamics.ok_or_else(|| missing("dynamics"))?,
            running_cost: self.running_cost.unwrap_or_else(|| Arc::new(|_, _, _| 0.0)),
            terminal_cost: self.terminal_cost.unwrap_or_else(|| Arc::new(|_| 0.0)),
            discount: self.discount,
            t_start: self.t_start,
            t_end: self.t_end,
            bounds: self.bounds,
        })
    }
}

impl ProblemSpec {
    /// Starts a builder; running and terminal costs default to zero, the
    /// horizon to `[0, 1]` and the discount to zero.
    pub fn builder(dim_state: usize, dim_control: usize) -> ProblemBuilder {
        ProblemBuilder {
            dim_state,
            dim_control,
            dynamics: None,
            running_cost: None,
            terminal_cost: None,
            discount: 0.0,
            t_start: 0.0,
            t_end: 1.0,
            bounds: None,
        }
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_control(&self) -> usize {
        self.dim_control
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn bounds(&self) -> Option<&ProblemBounds> {
        self.bounds.as_ref()
    }

    #[inline]
    pub fn eval_dynamics(&self, x: &[f64], u: &[f64], t: f64, out: &mut [f64]) {
        (self.dynamics)(x, u, t, out)
    }

    #[inline]
    pub fn running_cost(&self, x: &[f64], u: &[f64], t: f64) -> f64 {
        (self.running_cost)(x, u, t)
    }

    #[inline]
    pub fn terminal_cost(&self, x: &[f64]) -> f64 {
        (self.terminal_cost)(x)
    }

    /// Same problem with a different discount rate.
    pub fn with_discount(&self, lambda: f64) -> Result<ProblemSpec> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("discount must be finite and >= 0, got {lambda}")));
        }
        Ok(ProblemSpec { discount: lambda, ..self.clone() })
    }

    /// Same problem with a different horizon.
    pub fn with_horizon(&self, t_start: f64, t_end: f64) -> Result<ProblemSpec> {
        if !(t_end > t_start) {
            return Err(Error::InvalidParameter(format!("horizon requires T > t, got t={t_start} T={t_end}")));
        }
        Ok(ProblemSpec { t_start, t_end, ..self.clone() })
    }

    /// Same dynamics with the running and terminal costs replaced.
    pub fn with_costs(&self, running: RunningCostFn, terminal: TerminalCostFn) -> ProblemSpec {
        ProblemSpec { running_cost: running, terminal_cost: terminal, ..self.clone() }
    }

    pub(crate) fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim_state {
            return Err(Error::DimensionMismatch { expected: self.dim_state, got: x.len() });
        }
        Ok(())
    }

    pub(crate) fn check_control(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim_control {
            return Err(Error::DimensionMismatch { expected: self.dim_control, got: u.len() });
        }
        Ok(())
    }
}

/// Which side of the level set `φ = 0` is the forbidden region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// Obstacle is `{φ ≤ 0}`.
    Leq,
    /// Obstacle is `{φ ≥ 0}`.
    Geq,
}

#[derive(Clone)]
pub struct Obstacle {
    level_fn: LevelFn,
    sense: Sense,
}

impl fmt::Debug for Obstacle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Obstacle").field("sense", &self.sense).finish_non_exhaustive()
    }
}

impl Obstacle {
    pub fn new<F>(sense: Sense, level_fn: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Obstacle { level_fn: Arc::new(level_fn), sense }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn level(&self, x: &[f64]) -> f64 {
        (self.level_fn)(x)
    }

    /// True when `x` lies in the open interior of the obstacle. The level set
    /// itself belongs to the admissible closure.
    #[inline]
    pub fn strictly_contains(&self, x: &[f64]) -> bool {
        let phi = (self.level_fn)(x);
        match self.sense {
            Sense::Leq => phi < 0.0,
            Sense::Geq => phi > 0.0,
        }
    }
}

/// Closed box `Ω₀` minus the open interiors of the obstacles.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
    obstacles: Vec<Obstacle>,
}

impl ConstraintSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::InvalidParameter("constraint box must have dimension >= 1".into()));
        }
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if a.is_nan() || b.is_nan() || a > b {
                return Err(Error::InvalidParameter(format!("box axis {i}: lo={a} must be <= hi={b}")));
            }
        }
        Ok(ConstraintSet { lo, hi, obstacles: Vec::new() })
    }

    /// The whole of `ℝᵈ`.
    pub fn unbounded(dim: usize) -> Self {
        ConstraintSet {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
            obstacles: Vec::new(),
        }
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacles.push(obstacle);
        self
    }

    /// Copy of the box with every obstacle dropped.
    pub fn without_obstacles(&self) -> Self {
        ConstraintSet { lo: self.lo.clone(), hi: self.hi.clone(), obstacles: Vec::new() }
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

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn is_admissible(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.contains(x))
    }

    /// Admissibility without the dimension check.
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.lo.len());
        for ((v, lo), hi) in x.iter().zip(&self.lo).zip(&self.hi) {
            if !(*v >= *lo && *v <= *hi) {
                return false;
            }
        }
        !self.obstacles.iter().any(|o| o.strictly_contains(x))
    }
}

/// Finite control set `{u_1, …, u_M}`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    dim: usize,
    data: Vec<f64>,
}

impl ControlGrid {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidParameter("control grid must contain at least one control".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("controls must have dimension >= 1".into()));
        }
        let mut data = Vec::with_capacity(points.len() * dim);
        for (j, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("control {j} is not finite")));
            }
            if points[..j].iter().any(|q| q == p) {
                return Err(Error::InvalidParameter(format!("duplicate control {p:?}")));
            }
            data.extend_from_slice(p);
        }
        Ok(ControlGrid { dim, data })
    }

    /// Scalar controls.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    /// The eight vertices and edge midpoints of `[-1,1]²` followed by the origin.
    pub fn square9() -> Self {
        let pts = [
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [-1.0, 1.0],
            [-1.0, 0.0],
            [-1.0, -1.0],
            [0.0, -1.0],
            [1.0, -1.0],
            [0.0, 0.0],
        ];
        ControlGrid { dim: 2, data: pts.iter().flatten().copied().collect() }
    }

    /// `n` equally spaced unit directions starting at `(1, 0)`, optionally
    /// followed by the origin.
    pub fn unit_circle(n: usize, with_origin: bool) -> Result<Self> {
        if n == 0 && !with_origin {
            return Err(Error::InvalidParameter("unit circle grid needs at least one control".into()));
        }
        let mut pts: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
        if with_origin {
            pts.push(vec![0.0, 0.0]);
        }
        Self::new(pts)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }
}

/// Uniform time grid `t_n = t + n h`, `n = 0..=N̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    h: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Grid with step `h`; `(t_end - t_start) / h` must be an integer to 1e-12 relative.
    pub fn from_step(t_start: f64, t_end: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        let span = t_end - t_start;
        if !(span > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon requires T > t, got t={t_start} T={t_end}")));
        }
        let n = (span / h).round();
        if n < 1.0 || (n * h - span).abs() > 1e-12 * span {
            return Err(Error::InvalidParameter(format!("step h={h} does not divide the horizon {span}")));
        }
        Ok(TimeGrid { t_start, h, n_steps: n as usize })
    }

    /// Grid with `n_steps` equal steps.
    pub fn from_steps(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidParameter("number of steps must be positive".into()));
        }
        let span = t_end - t_start;
        if !(span > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon requires T > t, got t={t_start} T={t_end}")));
        }
        Ok(TimeGrid { t_start, h: span / n_steps as f64, n_steps })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    #[inline]
    pub fn time(&self, n: usize) -> f64 {
        self.t_start + n as f64 * self.h
    }

    /// Same start and step, truncated to `n_steps` levels.
    pub fn truncated(&self, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidParameter("number of steps must be positive".into()));
        }
        Ok(TimeGrid { n_steps, ..*self })
    }

    /// `β = 1 - λh`, the factor of the infinite-horizon scheme.
    pub fn beta(&self, lambda: f64) -> f64 {
        1.0 - lambda * self.h
    }

    /// `e^{-λh}`, the factor of the finite-horizon scheme.
    pub fn discount_factor(&self, lambda: f64) -> f64 {
        (-lambda * self.h).exp()
    }

    pub(crate) fn check_discount(&self, lambda: f64) -> Result<()> {
        if lambda > 0.0 && !(lambda * self.h < 1.0) {
            return Err(Error::InvalidParameter(format!("λh = {} must be < 1", lambda * self.h)));
        }
        Ok(())
    }
}

/// Writes `x + h f(x, u, t)` into `out` and checks it is finite.
#[inline]
pub(crate) fn euler_into(p: &ProblemSpec, x: &[f64], u: &[f64], t: f64, h: f64, out: &mut [f64]) -> Result<()> {
    p.eval_dynamics(x, u, t, out);
    let mut finite = true;
    for (o, xi) in out.iter_mut().zip(x) {
        finite &= o.is_finite();
        *o = xi + h * *o;
    }
    if !finite {
        return Err(Error::NonFiniteDynamics { x: x.to_vec(), u: u.to_vec(), t });
    }
    Ok(())
}

/// One explicit Euler step `x + h f(x, u, t_n)`.
pub fn euler_step(p: &ProblemSpec, x: &[f64], u: &[f64], t_n: f64, h: f64) -> Result<Vec<f64>> {
    p.check_state(x)?;
    p.check_control(u)?;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
    }
    let mut out = vec![0.0; x.len()];
    euler_into(p, x, u, t_n, h, &mut out)?;
    Ok(out)
}

/// Indices `j` whose Euler image `x + h f(x, u_j, t_n)` stays admissible.
pub fn admissible_controls(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    x: &[f64],
    t_n: f64,
    h: f64,
) -> Result<Vec<usize>> {
    p.check_state(x)?;
    if grid.dim() != p.dim_control() {
        return Err(Error::DimensionMismatch { expected: p.dim_control(), got: grid.dim() });
    }
    if !c.is_admissible(x)? {
        return Err(Error::InvalidParameter(format!("state {x:?} is not admissible")));
    }
    let mut img = vec![0.0; x.len()];
    let mut out = Vec::new();
    for (j, u) in grid.iter().enumerate() {
        euler_into(p, x, u, t_n, h, &mut img)?;
        if c.contains(&img) {
            out.push(j);
        }
    }
    Ok(out)
}

/// Largest `h` in `{h_max, h_max/2, …, h_max/2^20}` for which every sample has
/// at least one admissible control.
pub fn find_viable_step(
    p: &ProblemSpec,
    c: &ConstraintSet,
    grid: &ControlGrid,
    samples: &[Vec<f64>],
    h_max: f64,
) -> Result<Option<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("sample list is empty".into()));
    }
    if !(h_max > 0.0) {
        return Err(Error::InvalidParameter(format!("h_max must be positive, got {h_max}")));
    }
    let t = p.t_start();
    let mut h = h_max;
    for _ in 0..=20 {
        let mut viable = true;
        for x in samples {
            if admissible_controls(p, c, grid, x, t, h)?.is_empty() {
                viable = false;
                break;
            }
        }
        if viable {
            return Ok(Some(h));
        }
        h *= 0.5;
    }
    Ok(None)
}

/// Adds a stopping control `û` with `f(x, û) = 0` and `ℓ(x, û) = g(x)/λ`, so
/// that an exit-time problem becomes a plain infinite-horizon one.
///
/// `û` is appended after the existing controls and chosen outside their
/// bounding box so it can never collide with one of them.
pub fn with_stopping(p: &ProblemSpec, grid: &ControlGrid) -> Result<(ProblemSpec, ControlGrid)> {
    let lambda = p.discount();
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("stopping reformulation requires a positive discount".into()));
    }
    if grid.dim() != p.dim_control() {
        return Err(Error::DimensionMismatch { expected: p.dim_control(), got: grid.dim() });
    }
    let stop: Vec<f64> = (0..grid.dim())
        .map(|k| grid.iter().map(|u| u[k]).fold(f64::NEG_INFINITY, f64::max) + 1.0)
        .collect();

    let mut points = grid.to_vecs();
    points.push(stop.clone());
    let augmented = ControlGrid::new(points)?;

    let dynamics = p.dynamics.clone();
    let running = p.running_cost.clone();
    let terminal = p.terminal_cost.clone();
    let stop_dyn = stop.clone();
    let stop_cost = stop;

    let problem = ProblemSpec {
        dynamics: Arc::new(move |x, u, t, out| {
            if u == stop_dyn.as_slice() {
                out.fill(0.0);
            } else {
                dynamics(x, u, t, out)
            }
        }),
        running_cost: Arc::new(move |x, u, t| {
            if u == stop_cost.as_slice() {
                terminal(x) / lambda
            } else {
                running(x, u, t)
            }
        }),
        ..p.clone()
    };
    Ok((problem, augmented))
}
