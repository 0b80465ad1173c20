use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("quadrature failed to converge: {0}")]
    IntegrationFailure(String),

    #[error("{method}: loss of positivity at index {index} (insufficient working precision)")]
    PrecisionFailure { method: &'static str, index: usize },

    #[error("index {index} out of range (maximum {max})")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("spatial truncation N = {n} is below the potential degree {degree}")]
    TruncationTooSmall { n: usize, degree: usize },

    #[error("recurrence table too short: need n_max >= {needed}, have {available}")]
    InsufficientRecurrence { needed: usize, available: usize },

    #[error("operator too small: need size >= {needed}, have {available}")]
    OperatorTooSmall { needed: usize, available: usize },

    #[error("eigenvalue computation failed: {0}")]
    EigenFailure(String),

    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("singular pivot at row {0} during factorization")]
    SingularPivot(usize),

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    SolveResidual { residual: f64, tolerance: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("decay fit: {0}")]
    DecayFit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
