use thiserror::Error;

pub type Result<T> = std::result::Result<T, NcError>;

#[derive(Debug, Error)]
pub enum NcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid trace space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("level {level} out of range (filtration has {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("operator is not Hermitian (deviation {deviation:.3e}, scale {scale:.3e})")]
    NonHermitianInput { deviation: f64, scale: f64 },

    #[error("negative spectrum: eigenvalue {eigenvalue:.3e} at scale {scale:.3e}")]
    NegativeSpectrum { eigenvalue: f64, scale: f64 },

    #[error("malformed atom certificate: {0}")]
    MalformedCertificate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An inequality that holds with constant one failed on a concrete
    /// sample. This always points at an implementation bug.
    #[error("violation of `{check}`: lhs {lhs:.12e} > rhs {rhs:.12e}")]
    ViolationFound {
        check: String,
        lhs: f64,
        rhs: f64,
        sample: Box<serde_json::Value>,
    },

    #[error("assertion `{check}` failed: {detail}")]
    AssertionFailure {
        check: String,
        detail: String,
        sample: Box<serde_json::Value>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NcError {
    /// The offending instance attached to a failed check, if any.
    pub fn sample(&self) -> Option<&serde_json::Value> {
        match self {
            NcError::ViolationFound { sample, .. } | NcError::AssertionFailure { sample, .. } => {
                Some(sample)
            }
            _ => None,
        }
    }
}
