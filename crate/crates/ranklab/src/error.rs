use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Vector/matrix sizes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An iterative solver hit its iteration cap before meeting its
    /// stopping criterion. Never silent: the caller decides what to do
    /// with the partial residual.
    #[error("{solver} did not converge: {iterations} iterations, residual {residual:.3e} > target {target:.3e}")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },

    /// The chain has no unique stationary distribution (only possible
    /// without teleportation).
    #[error("stationary distribution is not unique: singular system at delta = 0")]
    NonUniqueStationary,

    /// A log-log fit window contains a value that cannot be logged.
    #[error("nonpositive value at rank {rank} inside the fit window")]
    NonPositiveFitValue { rank: usize },

    /// A text format failed to parse.
    #[error("parse error ({what}, line {line}): {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
