//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The adversarial lower-bound construction cannot be instantiated with
    /// the given parameters (e.g. the implied three-point amplitude is < 1).
    #[error("construction infeasible: {0}")]
    ConstructionInfeasible(String),

    /// A closed-form predictor was asked about a trajectory that leaves its
    /// validity region. `step` is the first violating iteration.
    #[error("validity precondition violated at step {step}: {msg}")]
    Validity { step: usize, msg: String },

    /// A non-finite gradient reached the step engine. The run is aborted and
    /// the trajectory is flagged instead of propagating NaNs silently.
    #[error("non-finite gradient at step {0}; run poisoned")]
    Poisoned(usize),

    #[error("config error: {0}")]
    Config(String),

    /// A verification report came back negative.
    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
