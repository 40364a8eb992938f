//! Solvers for finite- and infinite-horizon optimal control problems with
//! state constraints.
//!
//! The main solver expands the tree of states reachable under an Euler
//! discretization with a finite control set, pruning branches that leave the
//! admissible region or land within `ε` of an existing node, and then runs
//! backward dynamic programming over the tree levels. A fixed-grid
//! semi-Lagrangian solver serves as a baseline and a constrained value
//! iteration realizes the discrete infinite-horizon operator.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod catalog;
pub mod error;
pub mod feedback;
pub mod grid_sl;
pub mod infinite_horizon;
pub mod io;
pub mod problem;
pub mod scattered_interp;
mod spatial_hash;
pub mod tree;
pub mod tree_dp;

pub use catalog::{catalog, CatalogProblem};
pub use error::{Error, Result};
pub use feedback::{
    count_switches, evaluate_cost, synthesize, synthesize_extended, synthesize_tree_path, FeedbackMode,
    FeedbackParams, Trajectory,
};
pub use grid_sl::{query_grid_value, solve_grid, synthesize_grid_feedback, GridValue, UniformGrid};
pub use infinite_horizon::{apply_t, estimate_modulus, modulus_bound, sup_distance, sup_norm, value_iterate, VIParams, VIResult};
pub use problem::{
    admissible_controls, euler_step, find_viable_step, with_stopping, ConstraintSet, ControlGrid, Obstacle,
    ProblemBounds, ProblemSpec, Sense, TimeGrid,
};
pub use tree::{build_tree, query_successor, tree_stats, MergeNorm, Tree, TreeBuildParams, TreeStats};
pub use scattered_interp::{build_interpolant, InterpMethod, ScatteredInterpolant};
pub use tree_dp::{backward_sweep, value_at_root, ValueTable};
