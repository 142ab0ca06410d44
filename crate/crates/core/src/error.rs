use thiserror::Error;

use crate::space::Field;

#[derive(Debug, Error)]
pub enum Error {
    #[error("measure space must contain at least one point")]
    EmptySpace,

    #[error("weight at index {index} must be strictly positive and finite, got {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("field entry at index {index} is not finite ({value})")]
    NonFiniteValue { index: usize, value: f64 },

    #[error("Lp exponent must satisfy p >= 1, got {0}")]
    InvalidExponent(f64),

    #[error("truncation level alpha must be nonnegative, got {0}")]
    NegativeAlpha(f64),

    #[error("invalid normal contraction: {0}")]
    InvalidContraction(String),

    #[error("term {term} references point {index}, but the space has {size} points")]
    IndexOutOfRange { term: usize, index: usize, size: usize },

    #[error("invalid form parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not symmetric (entry ({row}, {col}) differs from its transpose by {defect})")]
    AsymmetricMatrix { row: usize, col: usize, defect: f64 },

    #[error("regularization parameter lambda must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("proximal solve did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        best: Field,
        residual: f64,
        iterations: usize,
    },

    #[error("Yosida approximations are not Cauchy along the lambda schedule (last change {last_change:e})")]
    NonCauchy { last: Field, last_change: f64 },

    #[error("operation not supported for this form: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
