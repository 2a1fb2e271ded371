use std::path::PathBuf;

use terrace_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("problem file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

impl CliError {
    /// 2 for bad input, 3 for an exceeded enumeration budget, 4 when a
    /// solve fails on valid input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Json(_) | CliError::Io { .. } => EXIT_USAGE,
            CliError::Core(e) => match e {
                Error::Budget { .. } => EXIT_BUDGET,
                Error::LinearAlgebra(_)
                | Error::Unbounded(_)
                | Error::Convergence { .. }
                | Error::Evaluator(_) => EXIT_SOLVER,
                _ => EXIT_USAGE,
            },
        }
    }
}
