use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gamma code is undefined for 0")]
    GammaZero,

    #[error("malformed encoding: {0}")]
    Malformed(String),

    #[error("feasibility guard: {0}")]
    Infeasible(String),

    #[error("condition {0} is not covered by the complexity table")]
    UnknownCondition(String),

    #[error("target has length {got}, table holds targets of length {expected}")]
    TargetLength { expected: u32, got: usize },

    #[error("coverage gap: {0}")]
    Coverage(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
