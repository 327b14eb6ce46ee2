use std::path::PathBuf;

/// Errors from the file formats, the sweep runner and the CLI.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] sbcm_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// 1 for numerical failures, 2 for everything the caller can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(e) => match e {
                sbcm_core::Error::InvalidArgument(_)
                | sbcm_core::Error::InvalidParams { .. }
                | sbcm_core::Error::EmptyGraph
                | sbcm_core::Error::SelfEdge(_)
                | sbcm_core::Error::NodeOutOfRange { .. }
                | sbcm_core::Error::DuplicateZealot(_)
                | sbcm_core::Error::NonFiniteOpinion { .. }
                | sbcm_core::Error::EmptyPath
                | sbcm_core::Error::InvalidCliqueSize(_)
                | sbcm_core::Error::StateLength { .. }
                | sbcm_core::Error::NonFiniteState(_)
                | sbcm_core::Error::ZealotNotPinned { .. } => 2,
                _ => 1,
            },
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
