use thiserror::Error;

/// Errors produced by the inference library.
///
/// Variants fall in two groups: input problems (bad files, bad
/// configuration, inconsistent dimensions) and numerical failures. See
/// [`Error::is_numerical`].
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{function}: argument {value} outside domain")]
    Domain { function: &'static str, value: f64 },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("exp overflow at component {index} (argument {value})")]
    Overflow { index: usize, value: f64 },

    #[error("line search stalled after {iterations} iterations (value {value}, |grad| {grad_norm})")]
    Stall {
        best: Vec<f64>,
        value: f64,
        grad_norm: f64,
        iterations: usize,
    },

    #[error("negative Hessian not positive definite even with jitter {jitter}")]
    NonConcave { jitter: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::NonFinite(_)
                | Error::Overflow { .. }
                | Error::Stall { .. }
                | Error::NonConcave { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
