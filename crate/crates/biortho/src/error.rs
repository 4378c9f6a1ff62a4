use thiserror::Error;

/// Every failure mode of the library. Numerical and validation failures are
/// kept apart so that callers (the CLI in particular) can map them to
/// different exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("ValidationError: {0}")]
    Validation(String),
    #[error("PoleError: {0}")]
    Pole(String),
    #[error("ZeroError: {0}")]
    Zero(String),
    #[error("NonFiniteError: {0}")]
    NonFinite(String),
    #[error("TruncationError: {0}")]
    Truncation(String),
    #[error("ContourCollisionError: {0}")]
    ContourCollision(String),
    #[error("ConfluenceError: {0}")]
    Confluence(String),
    #[error("NotConfluentError: {0}")]
    NotConfluent(String),
    #[error("DecayError: {0}")]
    Decay(String),
    #[error("SinPoleError: {0}")]
    SinPole(String),
    #[error("IntegerGapError: {0}")]
    IntegerGap(String),
    #[error("GridError: {0}")]
    Grid(String),
    #[error("SingularNormalization: {0}")]
    SingularNormalization(String),
    #[error("NoRepresentationError: {0}")]
    NoRepresentation(String),
    #[error("NearSingularError: {0}")]
    NearSingular(String),
    #[error("ImaginaryResidueError: {0}")]
    ImaginaryResidue(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Confluence(_)
                | Error::NotConfluent(_)
                | Error::IntegerGap(_)
                | Error::Decay(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
