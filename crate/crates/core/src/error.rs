use thiserror::Error;

/// Errors raised by the estimators, data loaders and verification routines.
#[derive(Debug, Error)]
pub enum KgdError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:e} below tolerance {tolerance:e}"
    )]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("response vector is constant; R² is undefined")]
    DegenerateResponse,

    #[error("iteration diverged at step {step} (t = {t}); the step size must satisfy dt < 2/s_max(K)")]
    Divergence { step: usize, t: f64 },

    #[error("bandwidth decrease did not terminate within {iterations} iterations at step {step}")]
    BandwidthLoop { step: usize, iterations: usize },

    #[error("trajectory has zero residual weight; weighted averages are undefined")]
    DegenerateTrajectory,

    #[error("all paired differences are zero; the signed-rank test is undefined")]
    DegenerateTest,

    #[error("hyper-parameter selection failed: {0}")]
    SelectionFailed(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse { row: usize, column: String, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, KgdError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(KgdError::InvalidArgument(msg.into()))
}
