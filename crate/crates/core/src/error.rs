use thiserror::Error;

/// Errors produced by problem construction, the solvers and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// An iterate became non-finite or left the divergence bound.
    #[error("divergence at iteration {k} (last finite iterate at k = {last_finite})")]
    Divergence { k: usize, last_finite: usize },

    /// The inner solver of an implicit step did not reach its tolerance.
    #[error("resolvent solve failed at outer step {step:?}: best residual {best_residual:.3e}")]
    Resolvent {
        step: Option<usize>,
        best_residual: f64,
    },

    #[error("no reference solution: best residual {best_residual:.3e}")]
    NoReference { best_residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
