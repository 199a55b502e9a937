//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// File parse failure with 1-based line number where known.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Grid or time axis violates a structural invariant.
    #[error("invalid axis: {0}")]
    InvalidAxis(String),

    /// Shapes of two operands do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Configuration or usage error (maps to exit code 2).
    #[error("config error: {0}")]
    Config(String),

    /// Numerical failure: degenerate covariance, non-convergence, blow-up.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Regression neighborhood too small or design matrix rank-deficient.
    #[error("rank-deficient regression: {msg} (condition estimate {cond:.3e})")]
    RankDeficient { msg: String, cond: f64 },

    /// Operation needs mask-free input but the field carries missing values.
    #[error("field has missing values: run fill first ({0})")]
    MissingValues(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable process exit code contract: 0 success, 1 numerical,
    /// 2 usage/config, 3 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Parse { .. } => 3,
            _ => 1,
        }
    }
}
