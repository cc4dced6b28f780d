use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::LinalgError;

/// Failures of scalar numerical kernels (root finding, quadrature).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("{what} = {value} is outside the domain of the function")]
    Domain { what: &'static str, value: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("adaptive quadrature failed on [{a}, {b}] (local error estimate {estimate:e})")]
    Quadrature { a: f64, b: f64, estimate: f64 },
}

/// A parameter set or data object violates one of its structural invariants.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{context}: {message}")]
pub struct ValidationError {
    pub context: &'static str,
    pub message: String,
}

impl ValidationError {
    pub fn new(context: &'static str, message: impl Into<String>) -> Self {
        Self {
            context,
            message: message.into(),
        }
    }
}

/// Failure of a single implicit time step.
#[derive(Debug, Clone, Error)]
pub enum StepError {
    #[error("Picard iteration for the active density did not converge in {iterations} iterations (last update {update:e}); try a smaller time step")]
    Picard { iterations: usize, update: f64 },
    #[error("coupling iteration did not converge in {iterations} iterations (update trace: {trace:?})")]
    Coupling { iterations: usize, trace: Vec<f64> },
    #[error("linear solve failed: {0}")]
    Linear(#[from] LinalgError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("step produced non-finite values")]
    NonFinite,
}

/// Top-level error type of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("time step failed at t = {t}: {source}")]
    Step {
        t: f64,
        #[source]
        source: StepError,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
