//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel parameter: {0}")]
    InvalidKernel(String),

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:.3e}, threshold {threshold:.3e})")]
    NotPsd { min_eigenvalue: f64, threshold: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("fixed-point solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("S-transform pole: {0}")]
    Pole(String),

    #[error("singular factor: {0}")]
    SingularFactor(String),

    #[error("derivative is singular (gamma >= 1)")]
    SingularDerivative,

    #[error("estimator domain error: {0}")]
    EstimatorDomain(String),

    #[error("degenerate test point: rho = {rho} >= 1")]
    DegenerateTestPoint { rho: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
