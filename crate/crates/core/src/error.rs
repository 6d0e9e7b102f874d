use thiserror::Error;

/// Errors raised by the solver modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BvpError {
    #[error("invalid interval [{a}, {b}]: endpoints must be finite with a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("invalid integrability exponent p = {0}; need p >= 1")]
    InvalidExponent(f64),

    #[error("unsupported exponent p = {0} for this operation")]
    UnsupportedExponent(f64),

    #[error("derivative of order {order} is not available: {reason}")]
    UnsupportedDerivative { order: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("point {point} lies outside [{a}, {b}]")]
    PointOutOfInterval { point: f64, a: f64, b: f64 },

    #[error("fractional order {order} must satisfy 0 <= order < {bound}")]
    OrderOutOfRange { order: f64, bound: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("problem is not well-posed: dim ker = {dim_ker}, dim coker = {dim_coker}, condition = {condition:e}")]
    SingularProblem {
        dim_ker: usize,
        dim_coker: usize,
        condition: f64,
    },

    #[error("no member of the approximation plan yields a well-posed problem")]
    NeverWellPosed,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, BvpError>;
