//! Scripted pipelines for the four benchmark tests, each with pass/fail
//! checks.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use treehjb::io::write_trajectory;
use treehjb::{catalog, synthesize, synthesize_tree_path, value_at_root, CatalogProblem, FeedbackParams, TreeBuildParams};

use crate::compare::{compare_problem, constraint_toggle, write_report, CompareOptions};
use crate::error::{CliError, CliResult};
use crate::run::{inadmissible_nodes, inadmissible_states, run_tree, ser_real, write_json, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestId {
    /// Oscillator in a box, tree path, constrained against unconstrained tree size.
    Test1,
    /// Minimum time through the channel, tree against grid, with and without inertia.
    Test2a,
    /// Minimum time around obstacles.
    Test2b,
    /// Van der Pol with a forbidden rectangle.
    Test3,
}

impl TestId {
    pub const ALL: [TestId; 4] = [TestId::Test1, TestId::Test2a, TestId::Test2b, TestId::Test3];

    pub fn name(self) -> &'static str {
        match self {
            TestId::Test1 => "test1",
            TestId::Test2a => "test2a",
            TestId::Test2b => "test2b",
            TestId::Test3 => "test3",
        }
    }
}

impl FromStr for TestId {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        TestId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown test {s:?}, expected one of test1, test2a, test2b, test3")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(serialize_with = "ser_real")]
    pub value: f64,
    pub limit: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproReport {
    pub test: String,
    pub checks: Vec<Check>,
    /// Everything measured along the way, timings included.
    pub metrics: BTreeMap<String, f64>,
}

impl ReproReport {
    fn new(id: TestId) -> Self {
        ReproReport { test: id.name().into(), checks: Vec::new(), metrics: BTreeMap::new() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The first failing check as a threshold error.
    pub fn first_failure(&self) -> CliResult<()> {
        match self.checks.iter().find(|c| !c.pass) {
            None => Ok(()),
            Some(c) => Err(CliError::Threshold(format!("{}: {}: {} is not {}", self.test, c.name, c.value, c.limit))),
        }
    }

    pub fn metric(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }

    fn put(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(Check { name: name.into(), value, limit: format!("<= {limit}"), pass: value <= limit });
    }

    fn within(&mut self, name: &str, value: f64, lo: f64, hi: f64) {
        self.checks.push(Check { name: name.into(), value, limit: format!("in [{lo}, {hi}]"), pass: value >= lo && value <= hi });
    }

    fn less_than(&mut self, name: &str, value: f64, limit: f64) {
        self.checks.push(Check { name: name.into(), value, limit: format!("< {limit}"), pass: value < limit });
    }
}

fn defaults(name: &str) -> CliResult<CatalogProblem> {
    Ok(catalog(name, &BTreeMap::new())?)
}

/// Runs the named test, writes its artifacts and `report.json` into `out`,
/// and returns the report whether or not the checks pass.
pub fn reproduce(id: TestId, out: &Path) -> CliResult<ReproReport> {
    std::fs::create_dir_all(out)?;
    let report = match id {
        TestId::Test1 => test1(out)?,
        TestId::Test2a => test2a(out)?,
        TestId::Test2b => tree_with_feedback(id, "eikonal_obstacles", out)?,
        TestId::Test3 => tree_with_feedback(id, "vanderpol", out)?,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Like [`reproduce`] but turns the first failing check into an error.
pub fn cmd_reproduce(id: TestId, out: &Path) -> CliResult<ReproReport> {
    let report = reproduce(id, out)?;
    report.first_failure()?;
    Ok(report)
}

fn test1(out: &Path) -> CliResult<ReproReport> {
    let mut rep = ReproReport::new(TestId::Test1);
    let cp = defaults("oscillator")?;
    let params = TreeBuildParams::new(cp.default_eps());
    let run = run_tree(&cp, params)?;
    let path = synthesize_tree_path(&run.tree, &run.values)?;
    write_trajectory(&out.join("trajectory.csv"), &path)?;
    let summary = Summary {
        solver: "TREE".into(),
        problem: cp.name.clone(),
        v0: value_at_root(&run.values),
        cost: Some(path.total_cost),
        nodes_total: run.stats.total_nodes,
        nodes_per_level: Some(run.stats.nodes_per_level.clone()),
        wall_time_s: run.value_time_s,
        switches: Some(path.switches()),
        seed: 0,
        vi_iterations: None,
        vi_converged: None,
    };
    write_json(&out.join("summary.json"), &summary)?;
    let max_x1 = path.states.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
    rep.put("v0", summary.v0);
    rep.put("cost", path.total_cost);
    rep.put("max_x1", max_x1);
    let bad_nodes = inadmissible_nodes(&run.tree, &cp.constraints)? as f64;
    let bad_states = inadmissible_states(&path, &cp.constraints)? as f64;
    drop(run);

    let mut free_params = BTreeMap::new();
    free_params.insert("constrained".to_string(), 0.0);
    let free = catalog("oscillator", &free_params)?;
    let toggle = constraint_toggle(&cp, &free, params)?;
    rep.put("nodes_constrained", toggle.constrained_nodes as f64);
    rep.put("nodes_unconstrained", toggle.unconstrained_nodes as f64);
    rep.put("node_ratio", toggle.ratio);
    rep.put("build_s_constrained", toggle.constrained_build_s);
    rep.put("build_s_unconstrained", toggle.unconstrained_build_s);
    rep.put("inadmissible_nodes", bad_nodes);
    rep.put("inadmissible_states", bad_states);

    rep.at_most("inadmissible tree nodes", bad_nodes, 0.0);
    rep.at_most("inadmissible trajectory states", bad_states, 0.0);
    rep.at_most("trajectory max x1", max_x1, 2.0 + 1e-9);
    rep.at_most("constrained/unconstrained nodes", toggle.ratio, 0.30);
    Ok(rep)
}

fn test2a(out: &Path) -> CliResult<ReproReport> {
    let mut rep = ReproReport::new(TestId::Test2a);
    let cp = defaults("eikonal_channel")?;
    let report = compare_problem(&cp, &CompareOptions::for_catalog(&cp, 7.0))?;
    write_report(out, &report)?;
    for r in &report.rows {
        let key = format!("{}{}", r.method.to_lowercase(), if r.inertia { "_inertia" } else { "" });
        rep.put(&format!("{key}_cost"), r.cost);
        rep.put(&format!("{key}_v0"), r.v0);
        rep.put(&format!("{key}_switches"), r.switches as f64);
        rep.put(&format!("{key}_value_s"), r.value_time_s);
        rep.put(&format!("{key}_feedback_s"), r.feedback_time_s);
        rep.put(&format!("{key}_inadmissible_states"), r.inadmissible_states as f64);
    }
    rep.put("inadmissible_nodes", report.tree_inadmissible_nodes as f64);
    rep.put("tree_nodes", report.row("TSA", false).size as f64);

    rep.at_most("inadmissible tree nodes", report.tree_inadmissible_nodes as f64, 0.0);
    for r in &report.rows {
        let label = format!("{}{} cost", r.method, if r.inertia { " + inertia" } else { "" });
        rep.within(&label, r.cost, 1.50, 1.72);
        rep.at_most(&format!("{label} inadmissible states"), r.inadmissible_states as f64, 0.0);
    }
    for m in ["TSA", "Classic"] {
        rep.less_than(&format!("{m} switches with inertia"), report.row(m, true).switches as f64, report.row(m, false).switches as f64);
    }
    Ok(rep)
}

/// Test 2b and Test 3: tree with the extended feedback over the catalog
/// feedback controls.
fn tree_with_feedback(id: TestId, name: &str, out: &Path) -> CliResult<ReproReport> {
    let mut rep = ReproReport::new(id);
    let cp = defaults(name)?;
    let run = run_tree(&cp, TreeBuildParams::new(cp.default_eps()))?;
    let traj = synthesize(&run.tree, &run.values, &FeedbackParams::extended(cp.feedback_controls.clone()))?;
    write_trajectory(&out.join("trajectory.csv"), &traj)?;
    let v0 = value_at_root(&run.values);
    let summary = Summary {
        solver: "TREE".into(),
        problem: cp.name.clone(),
        v0,
        cost: Some(traj.total_cost),
        nodes_total: run.stats.total_nodes,
        nodes_per_level: Some(run.stats.nodes_per_level.clone()),
        wall_time_s: run.value_time_s,
        switches: Some(traj.switches()),
        seed: 0,
        vi_iterations: None,
        vi_converged: None,
    };
    write_json(&out.join("summary.json"), &summary)?;
    let bad_nodes = inadmissible_nodes(&run.tree, &cp.constraints)? as f64;
    let bad_states = inadmissible_states(&traj, &cp.constraints)? as f64;
    let final_norm = traj.final_state().iter().map(|v| v * v).sum::<f64>().sqrt();
    rep.put("v0", v0);
    rep.put("cost", traj.total_cost);
    rep.put("tree_nodes", run.stats.total_nodes as f64);
    rep.put("value_s", run.value_time_s);
    rep.put("final_norm", final_norm);
    rep.put("switches", traj.switches() as f64);
    rep.put("inadmissible_nodes", bad_nodes);
    rep.put("inadmissible_states", bad_states);
    rep.at_most("inadmissible tree nodes", bad_nodes, 0.0);
    rep.at_most("inadmissible trajectory states", bad_states, 0.0);
    if id == TestId::Test3 {
        let in_rectangle = traj
            .states
            .iter()
            .filter(|x| x[0] > 0.1 && x[0] < 0.3 && x[1] > -0.5 && x[1] < -0.3)
            .count() as f64;
        rep.put("states_in_rectangle", in_rectangle);
        rep.at_most("states inside the forbidden rectangle", in_rectangle, 0.0);
        rep.at_most("final |x|", final_norm, 0.2);
    }
    Ok(rep)
}
