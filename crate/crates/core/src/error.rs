use thiserror::Error;

/// Errors raised by the samplers and their building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is singular or not positive definite: {0}")]
    SingularMatrix(String),

    #[error("reflection undefined: guide vector has norm {0:e}")]
    DegenerateReflection(f64),

    #[error("initial point is infeasible (min constraint value {0:e})")]
    Infeasible(f64),

    #[error("thinning bound violated: rate {rate} exceeds bound {bound}")]
    BoundViolation { rate: f64, bound: f64 },

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge (error estimate {estimate:e}, target {target:e})")]
    QuadratureNonConvergence { estimate: f64, target: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("batch means have zero variance with nonzero mean {0}")]
    ZeroVariance(f64),

    #[error("unknown sampler `{0}`")]
    UnknownSampler(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
