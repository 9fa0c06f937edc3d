use thiserror::Error;

/// Errors raised by the model, samplers, detectors and file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("matrix {matrix} is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric {
        matrix: &'static str,
        max_asymmetry: f64,
    },

    #[error("matrix {matrix} is not positive definite")]
    NotPositiveDefinite { matrix: &'static str },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("variable index {index} out of range (size {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("{n_cat} categorical variables exceed the enumeration cap of {cap}")]
    EnumerationCapExceeded { n_cat: usize, cap: usize },

    #[error("Ising marginal has no probability table; use the Gibbs sampler")]
    MissingTable,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("series too short for a rank scan: need at least {min}, got {got}")]
    TooShort { min: usize, got: usize },

    #[error("invalid modification: {0}")]
    InvalidModification(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by an invalid model, observation or configuration,
    /// as opposed to I/O and parse failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Parse { .. } | Error::Io(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
