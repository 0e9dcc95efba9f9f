use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate secant pair: step vector p is zero")]
    DegeneratePair,

    #[error("curvature condition violated: p'y = {py:e} must be positive")]
    CurvatureViolation { py: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("line search failed to find sufficient decrease after {trials} trials")]
    LineSearchFailure { trials: usize },

    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("PGM parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
