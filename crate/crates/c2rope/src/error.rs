use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension or length mismatch between operands.
    #[error("shape error: {0}")]
    Shape(String),

    /// A softmax row with no visible entries.
    #[error("degenerate softmax row {row}: no visible entries")]
    DegenerateRow { row: usize },

    /// Invalid variant, kind, or cross-field configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid runtime input (empty sequences, missing queries, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Malformed text in a config file or CSV payload.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    /// The message without its category prefix, for re-wrapping.
    pub(crate) fn bare_message(&self) -> String {
        match self {
            Error::Shape(m) | Error::Config(m) | Error::Input(m) => m.clone(),
            Error::DegenerateRow { .. } => self.to_string(),
            Error::Parse { msg, .. } => msg.clone(),
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
