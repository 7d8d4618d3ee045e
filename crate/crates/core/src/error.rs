use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied parameter is out of range. `field` names the parameter.
    #[error("invalid {field}: {reason}")]
    Config { field: &'static str, reason: String },

    /// Inputs handed to an operation do not satisfy its preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("{}", match .line {
        Some(line) => format!("ingestion error at line {line}: {msg}"),
        None => format!("ingestion error: {msg}"),
    })]
    Ingest { line: Option<usize>, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("controller error: {0}")]
    Controller(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn ingest(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Ingest {
            line,
            msg: msg.into(),
        }
    }
}
