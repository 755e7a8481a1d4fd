use thiserror::Error;

/// Errors produced by the library.
///
/// Each variant maps onto one of the CLI exit classes: usage (1),
/// consistency (2) and precision (3).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("parse error in {what} `{input}`: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("precision exhausted: requested {requested} bits but only {valid} are valid")]
    PrecisionExhausted { requested: u32, valid: u64 },

    #[error("precision budget too small: {bits} bits given, {required} required")]
    PrecisionBudget { bits: u64, required: u64 },

    #[error("digit source exhausted: needed {needed} digits, got {available}")]
    PrecisionSource { needed: u64, available: u64 },

    #[error("strategy bit source exhausted after {used} choices")]
    StrategyExhausted { used: u64 },

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("io error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn parse(what: &'static str, input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            what,
            input: input.to_string(),
            reason: reason.into(),
        }
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Parse { .. } | Error::Io { .. } => 1,
            Error::Consistency(_) => 2,
            Error::PrecisionExhausted { .. }
            | Error::PrecisionBudget { .. }
            | Error::PrecisionSource { .. }
            | Error::StrategyExhausted { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
