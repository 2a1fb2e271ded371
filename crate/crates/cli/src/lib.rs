//! Command-line front end for `terrace-core`: JSON problem files in, JSON
//! reports and CSV landscape grids out.

pub mod commands;
pub mod error;
pub mod problem;
pub mod report;

pub use commands::{
    cmd_classify, cmd_landscape, cmd_lambda, cmd_solve, cmd_verify, parse_point, read_point, Grid,
    Overrides,
};
pub use error::{CliError, CliResult};
pub use problem::{LoadedProblem, ModelSpec, ProblemFile};
pub use report::Report;
