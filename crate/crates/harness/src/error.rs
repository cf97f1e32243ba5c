use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Bad configuration; `key` names the offending setting.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: advgrasp_core::Error,
    },

    #[error("artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },

    /// The run stopped early on request; finished steps are on disk.
    #[error("interrupted after {steps} steps")]
    Interrupted { steps: usize },

    #[error(transparent)]
    Core(#[from] advgrasp_core::Error),
}

impl HarnessError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn artifact(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        HarnessError::Artifact {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            HarnessError::Core(advgrasp_core::Error::InvalidArgument { .. }) => 2,
            _ => 3,
        }
    }
}
