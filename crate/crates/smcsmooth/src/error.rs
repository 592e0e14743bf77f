//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by filters, kernels, samplers and the experiment harness.
#[derive(Debug, Error)]
pub enum SmcError {
    /// All potentials vanished at one time step, so weights cannot be
    /// normalised.
    #[error("degenerate weights at time {t}: all potentials are zero")]
    DegenerateWeights { t: usize },

    /// A NaN or infinity appeared where a finite number was required.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A backward kernel row has zero total mass.
    #[error("degenerate backward kernel row at time {t}")]
    DegenerateKernel { t: usize },

    /// An observed transition density exceeded the declared upper bound.
    #[error("transition density bound violated at time {t}: log m = {log_m}, log bound = {log_bound}")]
    BoundViolation { t: usize, log_m: f64, log_bound: f64 },

    /// The model does not provide a component required by the requested
    /// algorithm (transition density, density bound, guided proposal or
    /// coupled transition sampler).
    #[error("model does not support {0}")]
    Unsupported(&'static str),

    /// Weights do not form a probability vector.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// Input of the wrong size or shape.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Spatial sorting is limited to small dimensions.
    #[error("hilbert sort supports dimensions 1..=8, got {0}")]
    UnsupportedDimension(usize),

    /// Offline smoothing refused to store more particle data than the
    /// configured budget allows.
    #[error("storage budget exceeded: need {needed} floats, cap is {cap}")]
    StorageBudget { needed: usize, cap: usize },

    /// A matrix that must be positive definite failed its factorisation.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(&'static str),

    /// Configuration file or value errors.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed results file.
    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SmcError>;
