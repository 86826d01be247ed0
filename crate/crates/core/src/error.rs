use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid process spec: {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: value {value:e}, error estimate {error_estimate:e} after {subdivisions} subdivisions")]
    Quadrature {
        value: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error(
        "cholesky factorization failed after {attempts} jitter attempts (last jitter {jitter:e})"
    )]
    Cholesky { attempts: usize, jitter: f64 },

    #[error("grid of {requested} points exceeds the limit of {limit}")]
    MemoryGuard { requested: usize, limit: usize },

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error("derivative of order {order} is not available for {kind}")]
    Derivative { kind: &'static str, order: usize },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("degenerate estimator: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
