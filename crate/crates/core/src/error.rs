//! Error type shared by every module of the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while building a scenario, precoding it or
/// optimizing its power allocation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two vectors (or a vector and a subspace basis) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// Scenario parameters or channel data are inconsistent.
    #[error("invalid scenario: {0}")]
    Scenario(String),

    /// The scenario/config file could not be parsed.
    #[error("config error{}: {message}", LineSuffix(*.line))]
    Config {
        line: Option<usize>,
        message: String,
    },

    /// Zero-forcing is impossible (no directions left after nulling).
    #[error("precoding failed: {0}")]
    Precoding(String),

    /// A channel is zero or lies in the span of the interferers' channels.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// The brute-force grid would exceed the configured point cap.
    #[error("grid has {count} points, exceeding the cap of {cap}")]
    GridTooLarge { count: u128, cap: u128 },

    /// Invalid optimizer settings.
    #[error("invalid GA configuration: {0}")]
    GaConfig(String),

    /// An internal invariant was broken; indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            message: message.into(),
        }
    }

    pub(crate) fn config_global(message: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            message: message.into(),
        }
    }
}

struct LineSuffix(Option<usize>);

impl fmt::Display for LineSuffix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(line) => write!(f, " at line {line}"),
            None => Ok(()),
        }
    }
}
