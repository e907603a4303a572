use thiserror::Error;

/// Errors raised by the estimators, classifiers, data loaders and the
/// experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("singular linear system")]
    Singular,

    #[error("class {0} is absent or carries no weight")]
    EmptyClass(usize),

    #[error("degenerate cross-validation folds: {0}")]
    DegenerateFolds(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("every run failed; first error: {0}")]
    AllRunsFailed(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by user configuration or input data rather
    /// than by a numerical failure at run time.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidParameter { .. } | Error::Parse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
