use thiserror::Error;

#[derive(Debug, Error)]
pub enum SastError {
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("record {index}: {what}")]
    OutOfRange { index: usize, what: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, SastError>;

impl SastError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SastError::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        SastError::Shape {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        SastError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<serde_json::Error> for SastError {
    fn from(e: serde_json::Error) -> Self {
        SastError::Serde(e.to_string())
    }
}
