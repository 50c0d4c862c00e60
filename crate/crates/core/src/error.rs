use crate::optimizer::TraceRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (zero quaternion,
    /// singular tensor, non-rotation matrix).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("index ({index:?}) outside grid with intervals {dims:?}")]
    Index { index: [usize; 3], dims: [usize; 3] },

    #[error("structural mismatch: expected length {expected}, got {actual}")]
    Structure { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    Evaluation(String),

    #[error("preconditioner failure: {0}")]
    Preconditioner(String),

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("minimization diverged after {} iterations: {reason}", trace.len())]
    Divergence {
        reason: String,
        trace: Vec<TraceRecord>,
    },

    #[error("boundary condition: {0}")]
    BoundaryCondition(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
