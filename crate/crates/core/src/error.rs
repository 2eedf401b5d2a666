use thiserror::Error;

use crate::subst::GeometryReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid substitution: {0}")]
    Structure(String),

    #[error("geometry error: {0}")]
    Geometry(GeometryReport),

    #[error("incidence matrix is not primitive")]
    NotPrimitive,

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("lattice coordinates overflow: {0}")]
    Overflow(String),

    #[error("query exceeds window margin: {0}")]
    Margin(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) | Error::Json(_) => "ParseError",
            Error::Structure(_) => "StructureError",
            Error::Geometry(_) => "GeometryError",
            Error::NotPrimitive => "NotPrimitive",
            Error::DegenerateSpectrum(_) => "DegenerateSpectrum",
            Error::LengthMismatch(_) => "LengthMismatch",
            Error::Overflow(_) => "OverflowError",
            Error::Margin(_) => "MarginError",
            Error::InsufficientData(_) => "InsufficientData",
            Error::HypothesisViolated(_) => "HypothesisViolated",
            Error::Precondition(_) => "PreconditionFailed",
            Error::Io(_) => "IoError",
        }
    }
}
