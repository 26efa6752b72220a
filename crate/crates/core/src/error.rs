use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fold assignment degenerate after {retries} redraws (an empty fold every time)")]
    DegeneratePartition { retries: usize },

    #[error("axis {axis} has length 1 and cannot be split")]
    NoSplit { axis: usize },

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("estimator failed at lambda = {lambda}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{step}: {source}")]
    InStep {
        step: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} replications failed; first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_lambda(self, lambda: f64) -> Self {
        Error::AtLambda {
            lambda,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_step(self, step: &'static str) -> Self {
        Error::InStep {
            step,
            source: Box::new(self),
        }
    }

    /// Innermost error, with lambda and step annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLambda { source, .. } | Error::InStep { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the failure is a bad input rather than a numerical breakdown.
    pub fn is_usage(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidArgument(_) | Error::Parse(_) | Error::NoSplit { .. }
        )
    }
}
