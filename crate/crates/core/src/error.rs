use thiserror::Error;

/// Every failure the library reports. Variants carry enough context to
/// name the offending input in a CLI report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("discretization error: {0}")]
    Discretization(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("scale error: requested radius {radius} below admissible minimum {minimum}")]
    Scale { radius: f64, minimum: f64 },
    #[error("classification consistency error: {0}")]
    Consistency(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("experiment aborted at epsilon = {epsilon}: {reason}")]
    Aborted { epsilon: f64, reason: String },
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
