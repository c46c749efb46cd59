use thiserror::Error;

/// Failure to read a polynomial from its text form.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot parse polynomial at byte {position}: {message} (offending token `{token}`)")]
pub struct ParsePolynomialError {
    pub token: String,
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Parse(#[from] ParsePolynomialError),

    #[error("basis of dimension {dim} and degree {degree} is too large")]
    BasisOverflow { dim: usize, degree: usize },

    #[error("invalid diffusion specification: {0}")]
    InvalidSpec(String),

    #[error("degree violation: {0}")]
    DegreeViolation(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("point {point:?} lies outside the state space")]
    OutsideStateSpace { point: Vec<f64> },

    #[error("non-positive denominator {value} at {point:?}")]
    NonPositiveDenominator { value: f64, point: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model violation: {0}")]
    ModelViolation(String),

    #[error("Kalman filter failed at step {step}: innovation variance {value}")]
    FilterBreakdown { step: usize, value: f64 },

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
