use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Shapes of the inputs are inconsistent with each other.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    /// A numerical quantity left its admissible range beyond tolerance.
    #[error("numerical integrity violated: {0}")]
    NumericalIntegrity(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid stochastic map: {0}")]
    InvalidMap(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("block {block:?} has a vanishing effect sum")]
    DegenerateBlock { block: Vec<usize> },

    #[error("not a SIC fiducial: {0}")]
    NotSicFiducial(String),

    #[error("POVM carries no generator matrix")]
    MissingGenerator,

    #[error("undefined statistics: {0}")]
    UndefinedStatistics(String),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that mean "the input object is not what it claims to be"
    /// rather than a usage or environment problem.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::NotHermitian { .. }
                | Error::NumericalIntegrity(_)
                | Error::InvalidMap(_)
                | Error::NotSicFiducial(_)
                | Error::Structural(_)
                | Error::InvalidPartition(_)
                | Error::Format(_)
                | Error::Json(_)
        )
    }
}
