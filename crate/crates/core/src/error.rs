use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {reason} (token `{token}`)")]
    Parse {
        file: String,
        line: usize,
        token: String,
        reason: String,
    },

    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifest {}: {reason}", path.display())]
    Manifest { path: PathBuf, reason: String },

    #[error("duplicate image id `{0}`")]
    DuplicateImage(String),

    #[error("image `{image}` references unknown category {category}")]
    UnknownCategory { image: String, category: u32 },

    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible composition: {0}")]
    Composition(String),

    #[error("category tables differ between `{0}` and `{1}`")]
    CategoryMismatch(String, String),

    #[error("average precision undefined: no ground-truth objects")]
    NoGroundTruth,

    #[error("ties present; the exact distribution assumes continuous data, use the normal approximation")]
    TiesPresent,

    #[error("zero variance: all pooled values are tied")]
    ZeroVariance,

    #[error("no critical value for n1={n1}, n2={n2}, alpha={alpha}: {reason}")]
    NoCriticalValue {
        n1: usize,
        n2: usize,
        alpha: f64,
        reason: &'static str,
    },

    #[error("experiment matrix: {0}")]
    Matrix(String),

    #[error("mAP column required: {0}")]
    MissingMap(String),

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
