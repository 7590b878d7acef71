//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// Word address outside the configured L1 space.
    #[error("address {addr} out of range: L1 holds {total_words} words")]
    AddressError { addr: u64, total_words: u64 },

    /// Invalid configuration value or file.
    #[error("config error: {0}")]
    ConfigError(String),

    /// Operand shapes incompatible with the requested kernel.
    #[error("dimension error: {0}")]
    DimensionError(String),

    /// Ill-conditioned or undefined arithmetic (e.g. division by zero pilot).
    #[error("numerical error: {0}")]
    NumericalError(String),

    /// Cholesky factorization hit a non-positive pivot.
    #[error("matrix is not positive definite (pivot {pivot} at column {col})")]
    NotPositiveDefinite { col: usize, pivot: f64 },

    /// Working set exceeds L1 capacity.
    #[error("capacity error: working set {required_words} words exceeds L1 of {l1_words} words")]
    CapacityError { required_words: u64, l1_words: u64 },

    /// Load curve never flattens; saturation point undefined.
    #[error("throughput curve has no plateau; not saturated")]
    NotSaturated,

    /// Cycle budget exhausted with requests still in flight.
    #[error("cycle budget {budget} exhausted with {in_flight} requests in flight")]
    DeadlockSuspected { budget: u64, in_flight: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
