use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("{what} of size {n} exceeds the configured cap {cap}")]
    SizeCap { what: &'static str, n: usize, cap: usize },

    #[error("eigenvalue iteration did not converge for a {dim}x{dim} matrix")]
    EigenNoConvergence { dim: usize },

    #[error("matrix is numerically singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("initial state out of the box [0, m] at node {node} (value {value})")]
    OutOfBox { node: usize, value: f64 },

    #[error("non-finite state at step {step}, node {node}")]
    NonFinite { step: usize, node: usize },

    #[error("series of length {len} is too short (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
