//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A distance transform was requested over an empty seed set.
    #[error("distance transform has no seed pixels (empty seed set with boundary=ignore)")]
    NoSeeds,

    /// An operation that needs a nonempty object candidate got an empty mask.
    #[error("object candidate mask is empty")]
    EmptyFigure,

    /// A parameter violated its documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A descriptor fed to pooling contained a NaN or infinity.
    #[error("non-finite value in pooling input")]
    NumericalInput,

    /// Two pooled blocks with the same (kind, region) key were concatenated.
    #[error("duplicate pooled block: {0}")]
    DuplicateBlock(String),

    /// A feature vector was scored against a model trained on a different
    /// pooling configuration.
    #[error("feature configuration mismatch: model digest `{expected}`, feature digest `{actual}`")]
    ConfigMismatch { expected: String, actual: String },

    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A file referenced by a manifest does not exist.
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    /// Two images or candidates share an id.
    #[error("duplicate id: {0}")]
    DuplicateId(String),

    /// An experiment was asked to run over a split with no images.
    #[error("empty split: {0}")]
    EmptySplit(String),

    /// The manifest itself is malformed (bad version, bad category table, ...).
    #[error("manifest error: {0}")]
    Manifest(String),

    /// A stored file has the wrong magic, version, or layout.
    #[error("bad file format in {}: {reason}", path.display())]
    BadFormat { path: PathBuf, reason: String },

    /// Error with image or candidate context attached.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png error on {}: {reason}", path.display())]
    Png { path: PathBuf, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with image/candidate context, e.g. `"image img_0003, candidate 2"`.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
