//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use treehjb::{catalog, CatalogProblem, ControlGrid, FeedbackMode, FeedbackParams, MergeNorm, TreeBuildParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Solver {
    #[default]
    Tree,
    Grid,
    Vi,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Tree => "TREE",
            Solver::Grid => "GRID",
            Solver::Vi => "VI",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NormChoice {
    #[default]
    Euclidean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModeChoice {
    #[default]
    TreePath,
    Extended,
    ExtendedInertia,
}

/// Which catalog control set the grid solver sweeps with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ControlChoice {
    #[default]
    Catalog,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeConfig {
    /// `None` means `h²`.
    pub eps_merge: Option<f64>,
    pub merge_norm: NormChoice,
    /// Write `tree_nodes.csv`, `tree_edges.csv` and `tree_values.csv`.
    pub dump: bool,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { eps_merge: None, merge_norm: NormChoice::Euclidean, dump: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// `None` means the catalog spacing.
    pub dx: Option<f64>,
    pub value_controls: ControlChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViConfig {
    /// `None` means the catalog time step.
    pub h: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig { h: None, tol: 1e-8, max_iters: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackConfig {
    pub mode: ModeChoice,
    /// Number of unit-circle directions (plus the origin) for two-dimensional
    /// controls; `None` means the catalog feedback controls.
    pub extended_controls: Option<usize>,
    /// Inertia weight, used in `EXTENDED_INERTIA` mode and by `compare`.
    pub gamma: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig { mode: ModeChoice::TreePath, extended_controls: None, gamma: 7.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub tree: TreeConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub vi: ViConfig,
    #[serde(default)]
    pub feedback: FeedbackConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Recorded in the summary; the solvers themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Catalog problem with default everything else.
    pub fn for_problem(name: &str) -> Self {
        RunConfig {
            problem: ProblemConfig { name: name.into(), params: BTreeMap::new() },
            solver: Solver::default(),
            tree: TreeConfig::default(),
            grid: GridConfig::default(),
            vi: ViConfig::default(),
            feedback: FeedbackConfig::default(),
            out_dir: default_out_dir(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the configuration and fills every default from the catalog.
    pub fn resolve(&self) -> CliResult<Resolved> {
        let cp = catalog(&self.problem.name, &self.problem.params).map_err(|e| CliError::Config(e.to_string()))?;
        let eps = self.tree.eps_merge.unwrap_or_else(|| cp.default_eps());
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(CliError::Config(format!("tree.eps_merge must be finite and >= 0, got {eps}")));
        }
        let dx = self.grid.dx.unwrap_or(cp.dx);
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(CliError::Config(format!("grid.dx must be positive, got {dx}")));
        }
        let vi_h = self.vi.h.unwrap_or_else(|| cp.time_grid.h());
        if !(vi_h > 0.0) || !(self.vi.tol > 0.0) || self.vi.max_iters == 0 {
            return Err(CliError::Config("vi.h, vi.tol and vi.max_iters must be positive".into()));
        }
        let gamma = self.feedback.gamma;
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(CliError::Config(format!("feedback.gamma must be finite and >= 0, got {gamma}")));
        }
        let feedback_controls = match self.feedback.extended_controls {
            None => cp.feedback_controls.clone(),
            Some(_) if cp.problem.dim_control() != 2 => {
                return Err(CliError::Config("feedback.extended_controls needs a two-dimensional control".into()));
            }
            Some(n) => ControlGrid::unit_circle(n, true).map_err(|e| CliError::Config(e.to_string()))?,
        };
        let grid_controls = match self.grid.value_controls {
            ControlChoice::Catalog => cp.controls.clone(),
            ControlChoice::Feedback => feedback_controls.clone(),
        };
        let mut effective = self.clone();
        effective.tree.eps_merge = Some(eps);
        effective.grid.dx = Some(dx);
        effective.vi.h = Some(vi_h);
        Ok(Resolved {
            tree_params: TreeBuildParams {
                eps_merge: eps,
                merge_norm: match self.tree.merge_norm {
                    NormChoice::Euclidean => MergeNorm::Euclidean,
                    NormChoice::Max => MergeNorm::Max,
                },
            },
            dx,
            vi_h,
            feedback_controls,
            grid_controls,
            effective,
            cp,
        })
    }
}

/// A configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cp: CatalogProblem,
    pub tree_params: TreeBuildParams,
    pub dx: f64,
    pub vi_h: f64,
    pub feedback_controls: ControlGrid,
    pub grid_controls: ControlGrid,
    /// The input configuration with resolved defaults written back.
    pub effective: RunConfig,
}

impl Resolved {
    pub fn feedback_params(&self) -> FeedbackParams {
        let fb = &self.effective.feedback;
        match fb.mode {
            ModeChoice::TreePath => FeedbackParams::tree_path(),
            ModeChoice::Extended => FeedbackParams::extended(self.feedback_controls.clone()),
            ModeChoice::ExtendedInertia => FeedbackParams::inertia(self.feedback_controls.clone(), fb.gamma),
        }
    }

    /// Inertia weight for grid feedback (zero unless inertia mode is on).
    pub fn grid_gamma(&self) -> f64 {
        match self.feedback_params().mode {
            FeedbackMode::ExtendedInertia => self.effective.feedback.gamma,
            _ => 0.0,
        }
    }
}
