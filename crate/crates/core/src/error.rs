//! Error type shared by every module in the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, VolterraError>;

/// All failure modes of the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolterraError {
    /// A time series was constructed from an empty vector.
    #[error("time series must contain at least one value")]
    EmptySeries,

    /// A value at `index` was NaN or infinite.
    #[error("non-finite value at position {index}")]
    NonFiniteValue { index: usize },

    /// A memory (window length) of zero was requested.
    #[error("memory must be at least 1")]
    InvalidMemory,

    /// The embedding window does not leave room for a single target.
    #[error("memory {memory} leaves no target in a series of length {len}")]
    WindowTooLong { memory: usize, len: usize },

    /// Two paired vectors had different lengths.
    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// An operation received an empty slice where values were required.
    #[error("input must be non-empty")]
    EmptyInput,

    /// An integer quantity (binomial coefficient or basis size) overflowed.
    #[error("integer overflow while computing a basis dimension")]
    Overflow,

    /// A query vector did not match the model's memory.
    #[error("vector dimension {actual} does not match expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The requested monomial basis exceeds the in-memory guard.
    #[error("monomial basis of {dimension} entries exceeds the guard of {limit}")]
    FeatureSpaceTooLarge { dimension: u128, limit: u64 },

    /// The regularised system stayed singular through jitter escalation.
    #[error("linear system is singular")]
    SingularSystem,

    /// Training inputs or targets contained NaN or infinities.
    #[error("training data contains non-finite values")]
    NonFiniteInput,

    /// Operator recovery was requested on a kernel without a monomial expansion.
    #[error("operation requires a sum-polynomial kernel, got {kernel}")]
    UnsupportedKernel { kernel: String },

    /// A kernel was built with invalid parameters.
    #[error("invalid kernel: {reason}")]
    InvalidKernel { reason: String },

    /// The data is too short for the requested procedure.
    #[error("not enough data: {reason}")]
    InsufficientData { reason: String },

    /// An error sample was empty.
    #[error("error sample must be non-empty")]
    EmptySample,

    /// An error sample contained a negative value.
    #[error("error sample contains a negative value at position {index}")]
    NegativeError { index: usize },

    /// A Bonferroni family smaller than the number of p-values was given.
    #[error("family size {family_size} is smaller than the number of p-values {count}")]
    InvalidFamilySize { family_size: usize, count: usize },

    /// A simulated process was specified outside its stationarity region.
    #[error("process is non-stationary: {reason}")]
    NonStationary { reason: String },

    /// A configuration value was out of range.
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    /// Every candidate in a cross-validation grid failed on every fold.
    #[error("no grid candidate produced a finite cross-validation score")]
    NoViableCandidate,
}
