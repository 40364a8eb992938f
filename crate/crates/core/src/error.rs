use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite dynamics output at x={x:?}, u={u:?}, t={t}")]
    NonFiniteDynamics { x: Vec<f64>, u: Vec<f64>, t: f64 },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("initial state {0:?} is not admissible")]
    InadmissibleRoot(Vec<f64>),

    #[error("tree level {0} is empty: every branch was pruned")]
    EmptyLevel(usize),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("no admissible policy survives pruning from the initial state")]
    NoAdmissiblePolicy,

    #[error("feedback is stuck at step {0}: every control leads outside the constraint set")]
    Stuck(usize),

    #[error("level {0} has no finite values to interpolate")]
    NoFiniteValues(usize),

    #[error("degenerate site set for Delaunay interpolation ({0}); use IDW instead")]
    DegenerateSites(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("unknown problem `{name}`; valid names: {valid}")]
    UnknownProblem { name: String, valid: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
