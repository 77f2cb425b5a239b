use thiserror::Error;

/// Failures raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RkdError {
    #[error("bandwidth must be positive and finite, got {0}")]
    NonpositiveBandwidth(f64),

    #[error("singular local design on the {side} side: {reason}")]
    SingularDesign { side: &'static str, reason: String },

    #[error("weak first-stage kink for arm {arm}: |slope difference| = {slope_diff:.3e} below tolerance {tol:.1e}")]
    WeakKink { arm: u8, slope_diff: f64, tol: f64 },

    #[error("running variable has zero sample variance")]
    DegenerateX,

    #[error("zero bias constant in bandwidth selector ({0})")]
    ZeroCurvature(&'static str),

    #[error("zero variance constant in bandwidth selector ({0})")]
    ZeroVariance(&'static str),

    #[error("no observations with positive kernel weight on the {0} side")]
    EmptyWindow(&'static str),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("non-binary treatment value '{value}' at row {row}")]
    NonBinaryTreatment { row: usize, value: String },

    #[error("input file contains no observations")]
    EmptyFile,

    #[error("i/o error: {0}")]
    Io(String),
}

impl RkdError {
    /// Whether the failure reflects the data failing the design (as opposed
    /// to malformed input or an internal fault).
    pub fn is_design_failure(&self) -> bool {
        matches!(
            self,
            RkdError::WeakKink { .. }
                | RkdError::SingularDesign { .. }
                | RkdError::EmptyWindow(_)
                | RkdError::DegenerateX
                | RkdError::ZeroVariance(_)
        )
    }

    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            RkdError::Parse { .. }
                | RkdError::NonBinaryTreatment { .. }
                | RkdError::EmptyFile
                | RkdError::Io(_)
                | RkdError::InvalidArgument(_)
                | RkdError::LengthMismatch { .. }
        )
    }
}

impl From<std::io::Error> for RkdError {
    fn from(e: std::io::Error) -> Self {
        RkdError::Io(e.to_string())
    }
}

pub type Result<T, E = RkdError> = std::result::Result<T, E>;
