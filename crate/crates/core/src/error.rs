use crate::fidelity::Point;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("empty vector: the ambient dimension must be at least 1")]
    EmptyVector,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// The transform is rank deficient and not in diagonal (reduced) form.
    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),

    #[error("degenerate transform: rank 0")]
    DegenerateTransform,

    /// The safety radius is undefined for the zero vector.
    #[error("undefined radius: the vector has no nonzero component")]
    UndefinedRadius,

    #[error("operation not supported here: {0}")]
    Unsupported(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("objective is unbounded below: {0}")]
    Unbounded(String),

    #[error("no convergence after {iterations} iterations (best value {best_value})")]
    Convergence {
        iterations: usize,
        best: Box<Point>,
        best_value: f64,
    },

    #[error("enumeration budget exceeded: {what} needs {required}, limit is {limit}")]
    Budget {
        what: String,
        required: u128,
        limit: u128,
    },

    #[error("fidelity evaluator failed: {0}")]
    Evaluator(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
