//! Ready-made benchmark problems: a damped oscillator in a box, minimum time
//! through a circular channel, minimum time around obstacles, and a
//! constrained Van der Pol oscillator.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::problem::{ConstraintSet, ControlGrid, Obstacle, ProblemBounds, ProblemSpec, Sense, TimeGrid};

pub const NAMES: [&str; 4] = ["oscillator", "eikonal_channel", "eikonal_obstacles", "vanderpol"];

/// A fully assembled benchmark instance.
#[derive(Debug, Clone)]
pub struct CatalogProblem {
    pub name: String,
    pub problem: ProblemSpec,
    pub constraints: ConstraintSet,
    /// Controls used to build the value function.
    pub controls: ControlGrid,
    /// Controls used to reconstruct trajectories.
    pub feedback_controls: ControlGrid,
    pub time_grid: TimeGrid,
    pub x0: Vec<f64>,
    /// Finite box for grid solvers (the constraint box may be unbounded).
    pub grid_lo: Vec<f64>,
    pub grid_hi: Vec<f64>,
    /// Default spacing for grid solvers.
    pub dx: f64,
}

impl CatalogProblem {
    /// Default merge tolerance `ε = h²`.
    pub fn default_eps(&self) -> f64 {
        self.time_grid.h() * self.time_grid.h()
    }
}

struct Params {
    map: BTreeMap<String, f64>,
    used: Vec<&'static str>,
}

impl Params {
    fn new(map: &BTreeMap<String, f64>) -> Self {
        Params { map: map.clone(), used: Vec::new() }
    }

    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.used.push(key);
        self.map.get(key).copied().unwrap_or(default)
    }

    fn flag(&mut self, key: &'static str) -> Result<bool> {
        let v = self.get(key, 1.0);
        match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(Error::InvalidParameter(format!("`{key}` must be 0 or 1, got {v}"))),
        }
    }

    fn count(&mut self, key: &'static str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64);
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::InvalidParameter(format!("`{key}` must be a nonnegative integer, got {v}")));
        }
        Ok(v as usize)
    }

    fn finish(self, name: &str) -> Result<()> {
        for key in self.map.keys() {
            if !self.used.contains(&key.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "unknown parameter `{key}` for `{name}`; valid: {}",
                    self.used.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Builds the named benchmark with optional flat parameter overrides.
///
/// Common keys: `t_end`, `discount`, `h`, `x0_0`, `x0_1`, `constrained` (0/1),
/// `dx`. Problem specific: `k` (oscillator), `target_radius` and
/// `feedback_controls` (eikonal problems).
pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<CatalogProblem> {
    let mut p = Params::new(params);
    let out = match name {
        "oscillator" => oscillator(&mut p)?,
        "eikonal_channel" => eikonal(&mut p, EikonalGeometry::Channel)?,
        "eikonal_obstacles" => eikonal(&mut p, EikonalGeometry::Obstacles)?,
        "vanderpol" => vanderpol(&mut p)?,
        _ => {
            return Err(Error::UnknownProblem { name: name.to_string(), valid: NAMES.join(", ") });
        }
    };
    p.finish(name)?;
    Ok(out)
}

// With k > 0.3 the box is either never touched or cannot be kept at all from
// x0 = (1, 0.5); a weak repelling spring keeps the box constraint active.
fn oscillator(p: &mut Params) -> Result<CatalogProblem> {
    let k = p.get("k", -0.5);
    let t_end = p.get("t_end", 1.5);
    let lambda = p.get("discount", 0.0);
    let h = p.get("h", 0.025);
    let x0 = vec![p.get("x0_0", 1.0), p.get("x0_1", 0.5)];
    let constrained = p.flag("constrained")?;
    let dx = p.get("dx", 0.0125);

    let mut builder = ProblemSpec::builder(2, 1)
        .dynamics(move |x, u, _, out| {
            out[0] = x[1];
            out[1] = -k * x[0] + u[0] * x[1];
        })
        .running_cost(|x, _, _| (x[0] - 3.0).powi(2))
        .terminal_cost(|x| (x[0] - 3.0).powi(2))
        .discount(lambda)
        .horizon(0.0, t_end);
    if constrained {
        // Sup bounds and Lipschitz constants over [0,2]², |u| ≤ 1.
        builder = builder.bounds(ProblemBounds {
            m_f: Some((4.0 + (2.0 * k.abs() + 2.0).powi(2)).sqrt()),
            m_ell: Some(9.0),
            m_g: Some(9.0),
            l_f: Some((2.0 + k * k).sqrt()),
            l_ell: Some(6.0),
            l_g: Some(6.0),
        });
    }
    let problem = builder.build()?;
    let constraints = if constrained {
        ConstraintSet::new(vec![0.0, 0.0], vec![2.0, 2.0])?
    } else {
        ConstraintSet::unbounded(2)
    };
    let controls = ControlGrid::scalar(&[-1.0, 0.0, 1.0])?;
    Ok(CatalogProblem {
        name: "oscillator".into(),
        time_grid: TimeGrid::from_step(0.0, t_end, h)?,
        feedback_controls: controls.clone(),
        controls,
        problem,
        constraints,
        x0,
        grid_lo: vec![0.0, 0.0],
        grid_hi: vec![2.0, 2.0],
        dx,
    })
}

#[derive(Clone, Copy)]
enum EikonalGeometry {
    Channel,
    Obstacles,
}

fn eikonal(p: &mut Params, geometry: EikonalGeometry) -> Result<CatalogProblem> {
    let t_end = p.get("t_end", 2.0);
    let lambda = p.get("discount", 0.0);
    let h = p.get("h", 0.005);
    let x0 = vec![p.get("x0_0", 1.0), p.get("x0_1", 1.0)];
    let constrained = p.flag("constrained")?;
    // Holds the same lattice nodes as a 1e-4 ball (only the origin) for the
    // tree and the default grid, but off-lattice trajectories built from
    // unit-speed directions can actually enter it.
    let radius = p.get("target_radius", 1e-3);
    let dx = p.get("dx", 0.0025);
    let default_feedback = match geometry {
        EikonalGeometry::Channel => 64,
        EikonalGeometry::Obstacles => 32,
    };
    let n_feedback = p.count("feedback_controls", default_feedback)?;

    // Unit cost outside the target ball, zero inside: minimum time to reach it.
    let outside = move |x: &[f64]| if (x[0] * x[0] + x[1] * x[1]).sqrt() > radius { 1.0 } else { 0.0 };
    let problem = ProblemSpec::builder(2, 2)
        .dynamics(|_, u, _, out| out.copy_from_slice(u))
        .running_cost(move |x, _, _| outside(x))
        .terminal_cost(outside)
        .discount(lambda)
        .horizon(0.0, t_end)
        .bounds(ProblemBounds {
            m_f: Some(std::f64::consts::SQRT_2),
            m_ell: Some(1.0),
            m_g: Some(1.0),
            l_f: Some(0.0),
            l_ell: None,
            l_g: None,
        })
        .build()?;

    let constraints = if !constrained {
        ConstraintSet::unbounded(2)
    } else {
        let base = ConstraintSet::new(vec![-h, -h], vec![1.0, 1.0])?;
        match geometry {
            EikonalGeometry::Channel => {
                let r2 = |x: &[f64]| (x[0] - 1.0).powi(2) + x[1] * x[1];
                base.with_obstacle(Obstacle::new(Sense::Geq, move |x| r2(x) - 1.1))
                    .with_obstacle(Obstacle::new(Sense::Geq, move |x| 0.9 - r2(x)))
            }
            EikonalGeometry::Obstacles => base
                .with_obstacle(Obstacle::new(Sense::Geq, |x| {
                    0.005 - ((x[0] - 0.9).powi(2) + (x[1] - 0.9).powi(2))
                }))
                .with_obstacle(Obstacle::new(Sense::Geq, |x| {
                    0.001 - ((x[0] - 0.3).powi(2) / 80.0 + (x[1] - 0.05).powi(2))
                })),
        }
    };

    let name = match geometry {
        EikonalGeometry::Channel => "eikonal_channel",
        EikonalGeometry::Obstacles => "eikonal_obstacles",
    };
    Ok(CatalogProblem {
        name: name.into(),
        problem,
        constraints,
        controls: ControlGrid::square9(),
        feedback_controls: ControlGrid::unit_circle(n_feedback, true)?,
        time_grid: TimeGrid::from_step(0.0, t_end, h)?,
        x0,
        grid_lo: vec![-h, -h],
        grid_hi: vec![1.0, 1.0],
        dx,
    })
}

fn vanderpol(p: &mut Params) -> Result<CatalogProblem> {
    let t_end = p.get("t_end", 1.4);
    let lambda = p.get("discount", 0.0);
    let h = p.get("h", 0.025);
    let x0 = vec![p.get("x0_0", 0.4), p.get("x0_1", -0.3)];
    let constrained = p.flag("constrained")?;
    let dx = p.get("dx", 0.0125);

    let problem = ProblemSpec::builder(2, 1)
        .dynamics(|x, u, _, out| {
            out[0] = x[1];
            out[1] = 0.15 * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0];
        })
        .running_cost(|x, _, _| x[0] * x[0] + x[1] * x[1])
        .terminal_cost(|x| x[0] * x[0] + x[1] * x[1])
        .discount(lambda)
        .horizon(0.0, t_end)
        .build()?;

    let constraints = if constrained {
        // Open rectangle (0.1,0.3)×(-0.5,-0.3) removed; its edges stay admissible.
        ConstraintSet::new(vec![-h, f64::NEG_INFINITY], vec![0.5, 0.1])?.with_obstacle(Obstacle::new(
            Sense::Leq,
            |x| (0.1 - x[0]).max(x[0] - 0.3).max(-0.5 - x[1]).max(x[1] + 0.3),
        ))
    } else {
        ConstraintSet::unbounded(2)
    };
    Ok(CatalogProblem {
        name: "vanderpol".into(),
        problem,
        constraints,
        controls: ControlGrid::scalar(&[-1.0, 1.0])?,
        feedback_controls: ControlGrid::scalar(&[-1.0, 0.0, 1.0])?,
        time_grid: TimeGrid::from_step(0.0, t_end, h)?,
        x0,
        grid_lo: vec![-h, -1.0],
        grid_hi: vec![0.5, 0.1],
        dx,
    })
}
