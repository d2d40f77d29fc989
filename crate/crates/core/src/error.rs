use alloc::string::String;
use alloc::vec::Vec;

use crate::LabelId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("truncated input: {len} bytes is not a multiple of {record}")]
    Truncated { len: usize, record: usize },

    #[error("record {index}: {message}")]
    Record { index: usize, message: String },

    #[error("length mismatch: {left_name} has {left} entries, {right_name} has {right}")]
    LengthMismatch {
        left_name: &'static str,
        left: usize,
        right_name: &'static str,
        right: usize,
    },

    #[error("label map does not cover source labels {0:?}")]
    UnmappedLabels(Vec<LabelId>),

    #[error("labels with zero mass: {0:?}")]
    ZeroMassLabels(Vec<LabelId>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("split does not match segments: {0}")]
    SplitMismatch(String),

    #[error("subset {0} is empty")]
    EmptySubset(usize),

    #[error("missing scores for scans {0:?}")]
    MissingScores(Vec<usize>),

    #[error("target {target} is never reached by the {curve} curve")]
    UnreachableTarget { curve: &'static str, target: f64 },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
