use rydberg_qrc::QrcError;
use thiserror::Error;

use crate::idx::IdxError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: QrcError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl BenchError {
    /// Process exit code: 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Data(_) | BenchError::Idx(_) | BenchError::Io { .. } => 3,
            BenchError::Stage { source, .. } => match source {
                QrcError::Config(_) => 2,
                QrcError::Numerical(_) | QrcError::NotNormalized { .. } => 4,
                QrcError::Dimension { .. }
                | QrcError::InvalidInput(_)
                | QrcError::Format(_)
                | QrcError::Io(_) => 3,
            },
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Attaches a stage name to core errors.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, BenchError>;
}

impl<T> StageExt<T> for Result<T, QrcError> {
    fn stage(self, stage: &'static str) -> Result<T, BenchError> {
        self.map_err(|source| BenchError::Stage { stage, source })
    }
}
