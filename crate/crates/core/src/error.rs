use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation diverged at step {step}: state is not finite")]
    SimulationDiverged { step: usize },

    /// The post-step state left the domain by more than the floating-point guard.
    #[error("step {step} left the barrier domain by {overshoot:e}")]
    DomainOvershoot { step: usize, overshoot: f64 },

    #[error("model is not ergodic: invariant density normalizer does not converge")]
    ModelNotErgodic,

    #[error("asymptotic variance undefined at x = {x}: smoothed density is zero")]
    UndefinedVariance { x: f64 },

    #[error("no defined estimation points")]
    NoData,

    #[error("replication {index}: {source}")]
    Replication {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn in_replication(self, index: u64) -> Self {
        Error::Replication {
            index,
            source: Box::new(self),
        }
    }
}
