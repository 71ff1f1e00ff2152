use std::io;

use thiserror::Error;

use crate::store::ElemKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// The byte length of a vecs file does not line up with its record headers.
    #[error("truncated record at byte offset {offset}")]
    TruncatedRecord { offset: u64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("record at byte offset {offset} declares non-positive dimension {dim}")]
    NonPositiveDim { offset: u64, dim: i32 },

    #[error("element kind mismatch: expected {expected:?}, found {found:?}")]
    ElementKindMismatch { expected: ElemKind, found: ElemKind },

    #[error("at least {required} samples are needed, got {found}")]
    TooFewSamples { required: usize, found: usize },

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),

    #[error("index format version {found} does not match expected {expected}")]
    VersionMismatch { expected: u8, found: u8 },

    #[error("file truncated: {0}")]
    TruncatedFile(String),

    #[error("corrupt index file: {0}")]
    Corrupt(String),

    #[error("vector {id} has zero norm, angular distance is undefined")]
    ZeroNorm { id: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("length mismatch: {expected} expected lists, {found} actual lists")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
