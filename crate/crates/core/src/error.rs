use thiserror::Error;

/// Errors produced by discretization, assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {x} lies outside the parameter interval [0, 1]")]
    OutOfDomain { x: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("spline degree {degree} is too low: {reason}")]
    DegreeTooLow { degree: usize, reason: &'static str },

    #[error("knot vectors are not nested: {0}")]
    NotNested(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not positive definite ({context}, pivot {index})")]
    NotPositiveDefinite { context: String, index: usize },

    #[error("singular or inverted Jacobian (det = {det:e}) at parameter point {point:?}")]
    SingularJacobian { point: Vec<f64>, det: f64 },

    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(usize),

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "eigenvalue iteration did not converge after {iterations} steps \
         (best estimate [{lambda_min:e}, {lambda_max:e}])"
    )]
    EigenNotConverged {
        iterations: usize,
        lambda_min: f64,
        lambda_max: f64,
    },

    #[error("estimated memory {needed} bytes exceeds the cap of {cap} bytes")]
    MemoryCap { needed: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
