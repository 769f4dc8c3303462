//! CLI error type: every failure is bucketed into one of four exit codes so
//! scripts can tell configuration mistakes from data, numerical and I/O
//! problems.

use volterra::VolterraError;

/// Exit code 0 is success; these are the nonzero buckets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad flags, bad configuration file, invalid parameter ranges (exit 2).
    Config(String),
    /// Unreadable, empty or malformed input data (exit 3).
    Data(String),
    /// The mathematics failed: singular systems, overflow, no viable
    /// candidate (exit 4).
    Numerical(String),
    /// Filesystem trouble while reading or writing results (exit 5).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, msg) = match self {
            CliError::Config(m) => ("configuration", m),
            CliError::Data(m) => ("data", m),
            CliError::Numerical(m) => ("numerical", m),
            CliError::Io(m) => ("io", m),
        };
        write!(f, "{kind} error: {msg}")
    }
}

impl std::error::Error for CliError {}

impl From<VolterraError> for CliError {
    fn from(err: VolterraError) -> Self {
        use VolterraError::*;
        let msg = err.to_string();
        match err {
            InvalidMemory | InvalidKernel { .. } | InvalidConfig { .. }
            | InvalidFamilySize { .. } | NonStationary { .. } | UnsupportedKernel { .. } => {
                CliError::Config(msg)
            }
            EmptySeries | NonFiniteValue { .. } | WindowTooLong { .. }
            | LengthMismatch { .. } | EmptyInput | DimensionMismatch { .. }
            | InsufficientData { .. } | EmptySample | NegativeError { .. } => CliError::Data(msg),
            Overflow | FeatureSpaceTooLarge { .. } | SingularSystem | NonFiniteInput
            | NoViableCandidate => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Io(format!("serialising report: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
