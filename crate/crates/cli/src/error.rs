use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(#[from] treehjb::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("threshold failed: {0}")]
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 3,
            CliError::Threshold(_) => 4,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
