use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] seqstrat_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: field `{field}`: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), line, field: field.into(), message: message.into() }
    }

    /// Short machine-readable kind for structured error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Core(_) => "domain",
            Error::Io { .. } | Error::RawIo(_) => "io",
            Error::Format { .. } | Error::Json(_) => "format",
            Error::Usage(_) => "usage",
        }
    }
}
