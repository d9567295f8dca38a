use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::ids::{BucketId, ImageId, Target};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: not a feature matrix file: {detail}", path.display())]
    BadHeader { path: PathBuf, detail: String },

    #[error("{}: shape mismatch at row {row}: {detail}", path.display())]
    ShapeMismatch {
        path: PathBuf,
        row: usize,
        detail: String,
    },

    #[error("{}: non-finite value at row {row}, column {column}", path.display())]
    NonFinite {
        path: PathBuf,
        row: usize,
        column: usize,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("checksum mismatch: manifest says {expected}, files hash to {actual}")]
    Checksum { expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("codebook needs at least {k} training vectors but the collection has {n}; use a smaller k_cap")]
    TooFewVectors { n: usize, k: usize },

    #[error("kNN matrix build needs about {needed} bytes, over the configured cap of {cap} bytes")]
    KnnTooLarge { needed: u64, cap: u64 },

    #[error("unknown bucket {0}")]
    UnknownBucket(BucketId),

    #[error("unknown image {0}")]
    UnknownImage(ImageId),

    #[error("image {image} is not in {holder}")]
    NotAMember { image: ImageId, holder: Target },

    #[error("at most {max} buckets may be active at once")]
    TooManyActive { max: usize },

    #[error("at least one bucket must stay active")]
    NoActiveBucket,

    #[error("the discard pile cannot be {0}")]
    DiscardImmutable(&'static str),

    #[error("image {0} appears more than once in the feedback batch")]
    DuplicateFeedback(ImageId),

    #[error("{0} has no classifier yet: it needs at least one member")]
    NullClassifier(Target),

    #[error("unsupported {what} version {found}")]
    Version { what: &'static str, found: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
