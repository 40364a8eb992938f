//! Command-line orchestration for the treehjb solvers: JSON run
//! configuration, single solves, tree/grid comparisons and the scripted
//! benchmark tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod reproduce;
pub mod run;

pub use compare::{cmd_compare, compare_problem, constraint_toggle, BenchReport, CompareOptions, Row, ToggleReport};
pub use config::{ControlChoice, ModeChoice, NormChoice, Resolved, RunConfig, Solver};
pub use error::{CliError, CliResult};
pub use reproduce::{cmd_reproduce, reproduce, Check, ReproReport, TestId};
pub use run::{cmd_solve, Summary};

/// Caps the global rayon pool. Must run before any parallel work.
pub fn init_threads(n: Option<usize>) -> CliResult<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}
