use thiserror::Error;

/// Errors produced by the spectral bandit library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate similarity: no pair of rows has positive similarity")]
    DegenerateSimilarity,

    #[error("jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    EigenNoConvergence { sweeps: usize, residual: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("node index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("regret trace is full (capacity {0})")]
    TraceFull(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no ratings in input")]
    NoRatings,

    #[error("duplicate rating for user {user}, item {item} at line {line}")]
    DuplicateRating { user: String, item: String, line: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
