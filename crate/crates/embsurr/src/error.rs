use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] embsurr_core::Error),

    /// An upstream stage has not produced the file this stage reads.
    #[error("missing artifact {0} (run the upstream stage first)")]
    MissingArtifact(PathBuf),

    /// Configuration, digest or dataset checks failed.
    #[error("{0}")]
    Validation(String),
}

impl Error {
    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 2 for bad input, 3 for a missing upstream
    /// artifact, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingArtifact(_) => 3,
            Error::Format { .. } | Error::Core(_) | Error::Validation(_) => 2,
            Error::Io { .. } => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
