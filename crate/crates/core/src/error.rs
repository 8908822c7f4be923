use thiserror::Error;

/// Errors produced by the engine and its supporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus with smoothing k = 0 leaves the distribution undefined")]
    EmptyCorpus,

    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),

    #[error("infinite perplexity: token {token:?} at position {position} has probability 0")]
    InfinitePerplexity { token: String, position: usize },

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate demonstration example id {0:?}")]
    DuplicateExampleId(String),

    #[error("context-wise scheduling needs similarity stats from the current validation step")]
    MissingSimilarityStats,

    #[error(
        "search exhausted at step {step}: no valid candidates within {attempts} refill rounds"
    )]
    SafetyExhausted { step: usize, attempts: usize },

    #[error("rollback budget of {budget} exhausted")]
    RollbackExhausted { budget: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
