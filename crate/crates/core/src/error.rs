use std::path::PathBuf;

use crate::complex::ValidationReport;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degree {degree} out of range (valid: {min}..={max})")]
    DegreeOutOfRange { degree: usize, min: usize, max: usize },

    #[error("degree mismatch: expected {expected}, got {actual}")]
    DegreeMismatch { expected: usize, actual: usize },

    #[error("signal has {actual} values but degree {degree} has {expected} cells")]
    SignalLength {
        degree: usize,
        expected: usize,
        actual: usize,
    },

    #[error("{location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid complex: {0}")]
    InvalidComplex(ValidationReport),

    #[error("invalid matching: {0}")]
    InvalidMatching(ValidationReport),

    #[error("unknown cell {0:?}")]
    UnknownCell(String),

    #[error("zero incidence coefficient between {alpha} and {beta}")]
    ZeroIncidence { alpha: String, beta: String },

    #[error("no admissible pairing available in degree {degree}")]
    NoPairing { degree: usize },

    #[error("operation requires an orthogonal base (all inner-product matrices diagonal)")]
    NonOrthogonalBase,

    #[error("not a deformation retract: {0}")]
    InvalidRetract(String),

    #[error("eigensolver did not converge in degree {degree} (residual {residual:e})")]
    Eigensolver { degree: usize, residual: f64 },

    #[error("stage {stage} does not match its input complex: {message}")]
    StageMismatch { stage: usize, message: String },

    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
