use thiserror::Error;

/// Errors raised by the regularization toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid size: {0}")]
    Size(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    Definiteness { row: usize, pivot: f64 },

    #[error("subspace error: {0}")]
    Subspace(String),

    #[error("no grid member satisfies the discrepancy bound (final residual {residual:e}, bound {bound:e})")]
    Exhausted { residual: f64, bound: f64 },

    #[error("inner solver did not converge after {iterations} iterations (gradient norm {gradient:e})")]
    Convergence {
        iterations: usize,
        gradient: f64,
        last: Vec<f64>,
    },

    #[error("evaluation outside the admissible domain: {0}")]
    Domain(String),

    #[error("iteration diverged at step {step} (error {error:e}, running minimum {minimum:e})")]
    Divergence { step: usize, error: f64, minimum: f64 },

    #[error("step-size rule cannot reach target residual {target:e}; attainable range [{lower:e}, {upper:e}]")]
    AlphaRule { target: f64, lower: f64, upper: f64 },

    #[error("iteration budget of {0} steps exhausted before the stopping rule fired")]
    Budget(usize),

    #[error("importance weights degenerate: {0}")]
    Degeneracy(String),

    #[error("invalid configuration field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Method { context: String, source: Box<Error> },
}

impl Error {
    /// Wraps a downstream error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Method {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error beneath any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Method { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
