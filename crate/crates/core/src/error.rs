use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unsupported sample rate {rate} Hz in {path} (expected 44100 Hz; resample externally)")]
    UnsupportedRate { path: PathBuf, rate: u32 },

    #[error("unsupported audio format in {path}: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
}

impl Error {
    /// Short stable token used by the command line for machine-parseable failures.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Config(_) => "config",
            Error::OutOfRange(_) => "out-of-range",
            Error::Parse { .. } => "parse",
            Error::UnsupportedRate { .. } => "unsupported-rate",
            Error::UnsupportedFormat { .. } => "unsupported-format",
            Error::Io { .. } => "io",
            Error::Wav { .. } => "wav",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
