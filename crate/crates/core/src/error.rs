use thiserror::Error;

/// Errors produced by state construction and the operations built on it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("register of {qubits} qubits exceeds the {max}-qubit limit")]
    RegisterTooLarge { qubits: usize, max: usize },

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("measurement settings are informationally incomplete (rank {rank} < {needed})")]
    IncompleteSettings { rank: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
