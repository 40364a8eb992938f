//! Tree against grid, each with and without the inertia term.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use treehjb::io::{fmt_real, write_trajectory};
use treehjb::{
    build_tree, query_grid_value, synthesize, value_at_root, CatalogProblem, ControlGrid, Error, FeedbackParams, Trajectory,
    TreeBuildParams,
};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::run::{grid_feedback, inadmissible_nodes, inadmissible_states, run_grid, run_tree, ser_real, timed, write_json};

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub tree_params: TreeBuildParams,
    pub dx: f64,
    pub grid_controls: ControlGrid,
    pub feedback_controls: ControlGrid,
    pub gamma: f64,
    /// Run both value solvers once untimed before the timed runs.
    pub warmup: bool,
}

impl CompareOptions {
    pub fn for_catalog(cp: &CatalogProblem, gamma: f64) -> Self {
        CompareOptions {
            tree_params: TreeBuildParams::new(cp.default_eps()),
            dx: cp.dx,
            grid_controls: cp.controls.clone(),
            feedback_controls: cp.feedback_controls.clone(),
            gamma,
            warmup: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub method: &'static str,
    pub inertia: bool,
    #[serde(serialize_with = "ser_real")]
    pub v0: f64,
    /// `+∞` when the greedy reconstruction got stuck.
    #[serde(serialize_with = "ser_real")]
    pub cost: f64,
    pub switches: usize,
    pub inadmissible_states: usize,
    /// Tree nodes or grid nodes.
    pub size: usize,
    pub value_time_s: f64,
    pub feedback_time_s: f64,
    pub note: Option<String>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

impl Row {
    pub fn wall_time_s(&self) -> f64 {
        self.value_time_s + self.feedback_time_s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToggleReport {
    pub constrained_nodes: usize,
    pub unconstrained_nodes: usize,
    pub ratio: f64,
    pub constrained_build_s: f64,
    pub unconstrained_build_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub problem: String,
    pub gamma: f64,
    pub tree_inadmissible_nodes: usize,
    /// TSA, TSA + inertia, Classic, Classic + inertia.
    pub rows: Vec<Row>,
    pub constraint_toggle: Option<ToggleReport>,
}

impl BenchReport {
    pub fn row(&self, method: &str, inertia: bool) -> &Row {
        self.rows.iter().find(|r| r.method == method && r.inertia == inertia).expect("all four rows present")
    }

    /// Cost table laid out as methods by inertia setting.
    pub fn table(&self) -> String {
        let mut s = format!("{:<8} {:>14} {:>14}\n", "method", "no inertia", format!("gamma={}", self.gamma));
        for m in ["TSA", "Classic"] {
            let _ = writeln!(s, "{:<8} {:>14.6} {:>14.6}", m, self.row(m, false).cost, self.row(m, true).cost);
        }
        for m in ["TSA", "Classic"] {
            let (a, b) = (self.row(m, false), self.row(m, true));
            let _ = writeln!(s, "{m} switches {} -> {}, V0 {:.6}, time {:.2}s / {:.2}s", a.switches, b.switches, a.v0, a.wall_time_s(), b.wall_time_s());
        }
        if let Some(t) = &self.constraint_toggle {
            let _ = writeln!(s, "tree nodes constrained {} unconstrained {} ratio {:.4}", t.constrained_nodes, t.unconstrained_nodes, t.ratio);
        }
        s
    }
}

/// A stuck greedy reconstruction is reported as an infinite cost rather than
/// an error; value solver failures still abort.
fn feedback_row(
    method: &'static str,
    inertia: bool,
    v0: f64,
    size: usize,
    value_time_s: f64,
    cp: &CatalogProblem,
    f: impl FnOnce() -> CliResult<Trajectory>,
) -> CliResult<Row> {
    let (traj, secs) = timed(f);
    let mut row = Row {
        method,
        inertia,
        v0,
        cost: f64::INFINITY,
        switches: 0,
        inadmissible_states: 0,
        size,
        value_time_s,
        feedback_time_s: secs,
        note: None,
        trajectory: None,
    };
    match traj {
        Ok(t) => {
            row.cost = t.total_cost;
            row.switches = t.switches();
            row.inadmissible_states = inadmissible_states(&t, &cp.constraints)?;
            row.trajectory = Some(t);
        }
        Err(crate::CliError::Solver(e @ Error::Stuck(_))) => row.note = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(row)
}

pub fn compare_problem(cp: &CatalogProblem, opts: &CompareOptions) -> CliResult<BenchReport> {
    if opts.warmup {
        drop(run_tree(cp, opts.tree_params)?);
        drop(run_grid(cp, &opts.grid_controls, opts.dx)?);
    }
    let tree = run_tree(cp, opts.tree_params)?;
    let tree_v0 = value_at_root(&tree.values);
    let size = tree.stats.total_nodes;
    let mut rows = Vec::new();
    for (inertia, fp) in [
        (false, FeedbackParams::extended(opts.feedback_controls.clone())),
        (true, FeedbackParams::inertia(opts.feedback_controls.clone(), opts.gamma)),
    ] {
        rows.push(feedback_row("TSA", inertia, tree_v0, size, tree.value_time_s, cp, || Ok(synthesize(&tree.tree, &tree.values, &fp)?))?);
    }
    let tree_inadmissible_nodes = inadmissible_nodes(&tree.tree, &cp.constraints)?;
    drop(tree);

    let grid = run_grid(cp, &opts.grid_controls, opts.dx)?;
    let grid_v0 = query_grid_value(&grid.values, &grid.grid, &cp.x0, 0)?;
    for (inertia, gamma) in [(false, 0.0), (true, opts.gamma)] {
        rows.push(feedback_row("Classic", inertia, grid_v0, grid.grid.n_nodes(), grid.value_time_s, cp, || {
            grid_feedback(cp, &grid, &opts.feedback_controls, gamma)
        })?);
    }
    Ok(BenchReport { problem: cp.name.clone(), gamma: opts.gamma, tree_inadmissible_nodes, rows, constraint_toggle: None })
}

/// Tree sizes with and without the state constraint, built one after the
/// other so only one tree is alive at a time.
pub fn constraint_toggle(constrained: &CatalogProblem, free: &CatalogProblem, params: TreeBuildParams) -> CliResult<ToggleReport> {
    let build = |cp: &CatalogProblem| -> CliResult<(usize, f64)> {
        let (_, stats) = build_tree(&cp.problem, &cp.constraints, &cp.controls, &cp.time_grid, params, &cp.x0)?;
        Ok((stats.total_nodes, stats.build_wall_time))
    };
    let (a, ta) = build(constrained)?;
    let (b, tb) = build(free)?;
    Ok(ToggleReport { constrained_nodes: a, unconstrained_nodes: b, ratio: a as f64 / b as f64, constrained_build_s: ta, unconstrained_build_s: tb })
}

/// `compare_table.csv` holds only deterministic columns; timings go to
/// `compare.json`.
pub fn write_report(out: &Path, report: &BenchReport) -> CliResult<()> {
    std::fs::create_dir_all(out)?;
    let mut csv = String::from("method,inertia,v0,cost,switches,size\n");
    for r in &report.rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.method, u8::from(r.inertia), fmt_real(r.v0), fmt_real(r.cost), r.switches, r.size);
    }
    std::fs::write(out.join("compare_table.csv"), csv)?;
    for r in &report.rows {
        if let Some(t) = &r.trajectory {
            let name = format!("trajectory_{}{}.csv", r.method.to_lowercase(), if r.inertia { "_inertia" } else { "" });
            write_trajectory(&out.join(name), t)?;
        }
    }
    write_json(&out.join("compare.json"), report)
}

pub fn cmd_compare(cfg: &RunConfig, toggle: bool, warmup: bool) -> CliResult<BenchReport> {
    let r = cfg.resolve()?;
    let opts = CompareOptions {
        tree_params: r.tree_params,
        dx: r.dx,
        grid_controls: r.grid_controls.clone(),
        feedback_controls: r.feedback_controls.clone(),
        gamma: r.effective.feedback.gamma,
        warmup,
    };
    let mut report = compare_problem(&r.cp, &opts)?;
    if toggle {
        let mut params = cfg.problem.params.clone();
        params.insert("constrained".into(), 0.0);
        let mut free_cfg = cfg.clone();
        free_cfg.problem.params = params;
        let free = free_cfg.resolve()?;
        report.constraint_toggle = Some(constraint_toggle(&r.cp, &free.cp, r.tree_params)?);
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("config.json"), r.effective.to_json() + "\n")?;
    write_report(&cfg.out_dir, &report)?;
    Ok(report)
}
