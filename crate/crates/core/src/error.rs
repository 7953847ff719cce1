use std::path::PathBuf;

/// Errors produced by the design library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate weight at index {index}: w[{index}] = {value} must be strictly positive")]
    DegenerateWeight { index: usize, value: f64 },

    #[error("invalid design measure: {0}")]
    InvalidDesign(String),

    #[error("invalid variance vector: {0}")]
    InvalidVariance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pattern mismatch: {0}")]
    PatternMismatch(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate optimum: the criterion vanishes at the optimal design")]
    DegenerateOptimum,

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
