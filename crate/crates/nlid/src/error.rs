use std::io;
use std::path::PathBuf;

/// Failures of the experiment layer, each tied to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nlid_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed file: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl AppError {
    /// 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        use nlid_core::Error as E;
        match self {
            AppError::Config(_) | AppError::Format { .. } => 2,
            AppError::Core(E::InvalidArgument(_) | E::InvalidGeometry(_) | E::OutOfDomain { .. }) => 2,
            AppError::Io { .. } => 2,
            AppError::Core(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| AppError::Io { path, source }
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;

/// Exit code when the optimizer stopped short of the tolerance.
pub const EXIT_NOT_CONVERGED: i32 = 4;
