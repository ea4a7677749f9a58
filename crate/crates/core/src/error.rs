use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants carry enough context for the CLI to map them onto its exit-code
/// contract: `Domain`, `InvalidGrid`, `InvalidFraction`, `InsufficientData`
/// and `DomainMismatch` are validation failures, everything else is numerical.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid corruption fraction {fraction}: {reason}")]
    InvalidFraction { fraction: f64, reason: String },

    #[error("ratio {ratio} is not an exact step of the grid")]
    OffGridRatio { ratio: f64 },

    #[error("insufficient data in stage `{stage}`: need at least {needed}, got {got}")]
    InsufficientData {
        stage: String,
        needed: usize,
        got: usize,
    },

    #[error("degenerate grid in stage `{stage}`: {reason}")]
    DegenerateGrid { stage: String, reason: String },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("numerical failure in stage `{stage}`: {reason}")]
    Numerical { stage: String, reason: String },
}

impl Error {
    pub(crate) fn insufficient(stage: &str, needed: usize, got: usize) -> Self {
        Error::InsufficientData {
            stage: stage.to_string(),
            needed,
            got,
        }
    }

    pub(crate) fn degenerate(stage: &str, reason: impl Into<String>) -> Self {
        Error::DegenerateGrid {
            stage: stage.to_string(),
            reason: reason.into(),
        }
    }

    /// Prefix the stage name of stage-scoped errors.
    pub fn in_stage(self, outer: &str) -> Self {
        match self {
            Error::InsufficientData { stage, needed, got } => Error::InsufficientData {
                stage: format!("{outer}/{stage}"),
                needed,
                got,
            },
            Error::DegenerateGrid { stage, reason } => Error::DegenerateGrid {
                stage: format!("{outer}/{stage}"),
                reason,
            },
            Error::Numerical { stage, reason } => Error::Numerical {
                stage: format!("{outer}/{stage}"),
                reason,
            },
            other => other,
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::InvalidGrid(_)
                | Error::InvalidFraction { .. }
                | Error::OffGridRatio { .. }
                | Error::InsufficientData { .. }
                | Error::DomainMismatch(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
