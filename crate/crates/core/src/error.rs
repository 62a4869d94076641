//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A gradient accumulation produced a non-finite value.
    #[error("numeric overflow while accumulating the gradient of datum {datum}")]
    NumericOverflow { datum: usize },

    /// The prior gradient or a scaled sum became non-finite.
    #[error("numeric overflow in the {stage}")]
    GradientOverflow { stage: &'static str },

    /// A Langevin step produced a non-finite coordinate.
    #[error("chain diverged at iteration {iteration} with step size {step_size:e}")]
    Diverged { iteration: usize, step_size: f64 },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("enumeration of {count} cases exceeds the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Attach the chain iteration to an error raised inside a transition.
    pub fn at_iteration(self, iteration: usize) -> Self {
        match self {
            Error::Diverged { step_size, .. } => Error::Diverged {
                iteration,
                step_size,
            },
            e @ Error::AtIteration { .. } => e,
            other => Error::AtIteration {
                iteration,
                source: Box::new(other),
            },
        }
    }

    /// True for a diverged step or a gradient overflow, directly or wrapped.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Diverged { .. } | Error::NumericOverflow { .. } | Error::GradientOverflow { .. } => true,
            Error::AtIteration { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}
