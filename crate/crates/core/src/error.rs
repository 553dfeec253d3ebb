use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller supplied an out-of-range or inconsistent argument.
    #[error("{0}")]
    Argument(String),

    /// The input data cannot support the requested operation.
    #[error("{0}")]
    Domain(String),

    #[error("unsupported bundle schema version {found} (expected {expected})")]
    Schema { found: u32, expected: u32 },

    #[error("checksum mismatch in {path}")]
    Checksum { path: PathBuf },

    #[error("not found: {0}")]
    NotFound(String),

    /// A pipeline stage ran before the artifact it consumes existed.
    #[error("missing artifact `{artifact}`; run `{stage}` first")]
    Dependency { artifact: String, stage: String },

    #[error("{0}")]
    Config(String),

    #[error("bundle is locked by another process: {0}")]
    Locked(PathBuf),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable class used by the command line front end.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Domain(_) => "domain",
            Error::Schema { .. } => "schema",
            Error::Checksum { .. } => "checksum",
            Error::NotFound(_) => "not_found",
            Error::Dependency { .. } => "dependency",
            Error::Config(_) => "config",
            Error::Locked(_) => "locked",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
