//! Solver runs shared by every subcommand.

use std::path::Path;
use std::time::Instant;

use serde::{Serialize, Serializer};
use treehjb::io::{write_grid_values, write_trajectory, write_tree_edges, write_tree_nodes, write_tree_values, write_vi_residuals, write_vi_values};
use treehjb::{
    backward_sweep, build_tree, solve_grid, synthesize, synthesize_grid_feedback, value_at_root, value_iterate, CatalogProblem,
    ConstraintSet, ControlGrid, GridValue, Trajectory, Tree, TreeBuildParams, TreeStats, UniformGrid, VIParams, ValueTable,
};

use crate::config::{Resolved, RunConfig, Solver};
use crate::error::CliResult;

pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// JSON has no infinities; non-finite reals are written as strings.
pub fn ser_real<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&treehjb::io::fmt_real(*v))
    }
}

pub fn ser_opt_real<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => ser_real(v, s),
        None => s.serialize_none(),
    }
}

pub struct TreeRun {
    pub tree: Tree,
    pub values: ValueTable,
    pub stats: TreeStats,
    /// Build plus backward sweep.
    pub value_time_s: f64,
}

pub fn run_tree(cp: &CatalogProblem, params: TreeBuildParams) -> CliResult<TreeRun> {
    let (res, secs) = timed(|| -> CliResult<_> {
        let (tree, stats) = build_tree(&cp.problem, &cp.constraints, &cp.controls, &cp.time_grid, params, &cp.x0)?;
        let values = backward_sweep(&tree)?;
        Ok((tree, stats, values))
    });
    let (tree, stats, values) = res?;
    Ok(TreeRun { tree, values, stats, value_time_s: secs })
}

pub struct GridRun {
    pub grid: UniformGrid,
    pub values: GridValue,
    pub value_time_s: f64,
}

pub fn run_grid(cp: &CatalogProblem, controls: &ControlGrid, dx: f64) -> CliResult<GridRun> {
    let grid = UniformGrid::new(cp.grid_lo.clone(), cp.grid_hi.clone(), dx, &cp.constraints)?;
    let (values, secs) = timed(|| solve_grid(&cp.problem, &cp.constraints, controls, &cp.time_grid, &grid));
    Ok(GridRun { grid, values: values?, value_time_s: secs })
}

pub fn grid_feedback(cp: &CatalogProblem, run: &GridRun, controls: &ControlGrid, gamma: f64) -> CliResult<Trajectory> {
    let gamma = (gamma > 0.0).then_some(gamma);
    Ok(synthesize_grid_feedback(&cp.problem, &cp.constraints, controls, &cp.time_grid, &run.grid, &run.values, &cp.x0, gamma)?)
}

/// Nodes of the tree that fail the admissibility test.
pub fn inadmissible_nodes(tr: &Tree, c: &ConstraintSet) -> CliResult<usize> {
    let mut bad = 0;
    for n in 0..tr.n_levels() {
        for i in 0..tr.level_len(n) {
            bad += usize::from(!c.is_admissible(tr.state(n, i))?);
        }
    }
    Ok(bad)
}

pub fn inadmissible_states(t: &Trajectory, c: &ConstraintSet) -> CliResult<usize> {
    let mut bad = 0;
    for x in &t.states {
        bad += usize::from(!c.is_admissible(x)?);
    }
    Ok(bad)
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub solver: String,
    pub problem: String,
    #[serde(serialize_with = "ser_real")]
    pub v0: f64,
    #[serde(serialize_with = "ser_opt_real")]
    pub cost: Option<f64>,
    pub nodes_total: usize,
    pub nodes_per_level: Option<Vec<usize>>,
    pub wall_time_s: f64,
    pub switches: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vi_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vi_converged: Option<bool>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs the configured solver and writes its artifacts, the effective
/// configuration and `summary.json` into the output directory.
pub fn cmd_solve(cfg: &RunConfig) -> CliResult<Summary> {
    let r = cfg.resolve()?;
    let out = cfg.out_dir.as_path();
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.json"), r.effective.to_json() + "\n")?;
    let summary = match cfg.solver {
        Solver::Tree => solve_tree(&r, out)?,
        Solver::Grid => solve_grid_cmd(&r, out)?,
        Solver::Vi => solve_vi(&r, out)?,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn solve_tree(r: &Resolved, out: &Path) -> CliResult<Summary> {
    let cp = &r.cp;
    let run = run_tree(cp, r.tree_params)?;
    if r.effective.tree.dump {
        write_tree_nodes(&out.join("tree_nodes.csv"), &run.tree)?;
        write_tree_edges(&out.join("tree_edges.csv"), &run.tree)?;
        write_tree_values(&out.join("tree_values.csv"), &run.tree, &run.values)?;
    }
    let (traj, fb_secs) = timed(|| synthesize(&run.tree, &run.values, &r.feedback_params()));
    let traj = traj?;
    write_trajectory(&out.join("trajectory.csv"), &traj)?;
    Ok(Summary {
        solver: Solver::Tree.name().into(),
        problem: cp.name.clone(),
        v0: value_at_root(&run.values),
        cost: Some(traj.total_cost),
        nodes_total: run.stats.total_nodes,
        nodes_per_level: Some(run.stats.nodes_per_level.clone()),
        wall_time_s: run.value_time_s + fb_secs,
        switches: Some(traj.switches()),
        seed: r.effective.seed,
        vi_iterations: None,
        vi_converged: None,
    })
}

fn solve_grid_cmd(r: &Resolved, out: &Path) -> CliResult<Summary> {
    let cp = &r.cp;
    let run = run_grid(cp, &r.grid_controls, r.dx)?;
    let last = run.values.n_levels() - 1;
    write_grid_values(&out.join("grid_values.csv"), &run.grid, &run.values, &[0, last])?;
    let v0 = treehjb::query_grid_value(&run.values, &run.grid, &cp.x0, 0)?;
    let (traj, fb_secs) = timed(|| grid_feedback(cp, &run, &r.feedback_controls, r.grid_gamma()));
    let traj = traj?;
    write_trajectory(&out.join("trajectory.csv"), &traj)?;
    Ok(Summary {
        solver: Solver::Grid.name().into(),
        problem: cp.name.clone(),
        v0,
        cost: Some(traj.total_cost),
        nodes_total: run.grid.n_nodes(),
        nodes_per_level: None,
        wall_time_s: run.value_time_s + fb_secs,
        switches: Some(traj.switches()),
        seed: r.effective.seed,
        vi_iterations: None,
        vi_converged: None,
    })
}

fn solve_vi(r: &Resolved, out: &Path) -> CliResult<Summary> {
    let cp = &r.cp;
    let grid = UniformGrid::new(cp.grid_lo.clone(), cp.grid_hi.clone(), r.dx, &cp.constraints)?;
    let vi = &r.effective.vi;
    let params = VIParams::new(r.vi_h, vi.tol, vi.max_iters);
    let (res, secs) = timed(|| value_iterate(&cp.problem, &cp.constraints, &r.grid_controls, &grid, &params));
    let res = res?;
    write_vi_values(&out.join("vi_values.csv"), &grid, &res.values)?;
    write_vi_residuals(&out.join("vi_residuals.csv"), &res.residuals)?;
    Ok(Summary {
        solver: Solver::Vi.name().into(),
        problem: cp.name.clone(),
        v0: grid.interpolate(&res.values, &cp.x0).unwrap_or(f64::INFINITY),
        cost: None,
        nodes_total: grid.n_nodes(),
        nodes_per_level: None,
        wall_time_s: secs,
        switches: None,
        seed: r.effective.seed,
        vi_iterations: Some(res.iterations),
        vi_converged: Some(res.converged),
    })
}
