use thiserror::Error;

/// Errors raised by the statistical routines and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient sample: need at least {needed} values, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate table: {0}")]
    DegenerateTable(String),

    #[error("degenerate sequence: {0}")]
    DegenerateSequence(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("mixed run kinds: {0}")]
    MixedKinds(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
