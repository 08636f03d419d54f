use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parent algebra mismatch: {0}")]
    ParentMismatch(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("not connected: {0}")]
    NotConnected(String),

    #[error("not unital: {0}")]
    NotUnital(String),

    #[error("degenerate inclusion: {0}")]
    DegenerateInclusion(String),

    #[error("eigen-solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("insufficient tower depth: level {needed} required, tower built to level {built}")]
    InsufficientDepth { needed: i32, built: i32 },

    #[error("depth {requested} refused: {reason}")]
    DepthRefused { requested: usize, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("cardinality {count} exceeds the configured cap {cap}")]
    CardinalityCap { count: usize, cap: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
