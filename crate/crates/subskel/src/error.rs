use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("trajectory must contain at least one vertex")]
    EmptyTrajectory,

    #[error("non-finite coordinate in {context}")]
    NonFinite { context: String },

    #[error("unknown joint `{0}`")]
    UnknownJoint(String),

    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("invalid sequence `{label}`: {reason}")]
    InvalidSequence { label: String, reason: String },

    #[error("class `{label}` has {available} sequences but {requested} were requested for training")]
    ClassTooSmall {
        label: String,
        available: usize,
        requested: usize,
    },

    #[error("class `{0}` missing from the inner training split")]
    ClassMissingFromInnerSplit(String),

    #[error("subject ids required for a cross-subject split but sequence `{0}` has none")]
    MissingSubject(String),

    #[error("degenerate rotation reference in frame {frame}: {reason}")]
    DegenerateRotation { frame: usize, reason: String },

    #[error("zero-length bone {a}-{b} in frame {frame}")]
    ZeroLengthBone { frame: usize, a: String, b: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
