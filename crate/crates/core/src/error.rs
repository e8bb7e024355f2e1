use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("pose distance undefined: no mutually visible keypoints")]
    UndefinedDistance,
    #[error("data error: {0}")]
    Data(String),
    #[error("format error in {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("checkpoint incompatible: {0}")]
    Version(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Schema(_) | Error::Argument(_) | Error::Version(_) | Error::Json(_) => 2,
            Error::Numerical(_) => 4,
            _ => 3,
        }
    }
}
