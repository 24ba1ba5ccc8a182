//! Crate-wide error type.
//!
//! Errors fall into three coarse classes that the CLI maps onto exit codes:
//! configuration/usage problems, data problems (unreadable inputs, malformed
//! or mismatched files), and numeric failures (non-finite values, diverging
//! solvers). Skippable per-file issues during ingest are *not* errors; they
//! are collected as warnings on the manifest instead.

use std::path::PathBuf;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Filesystem access failed.
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An image file could not be decoded.
    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    /// A dataset root contained no usable class directories.
    #[error("no class directories with decodable images under {root}")]
    EmptyDataset { root: PathBuf },

    /// A class directory exists but yielded no decodable images.
    #[error("class directory {path} contains no decodable images")]
    EmptyClass { path: PathBuf },

    /// A parameter or configuration value is out of its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A feature-group name could not be parsed or is absent from a schema.
    #[error("unknown feature group: {0}")]
    UnknownGroup(String),

    /// Two artifacts that must describe the same data disagree.
    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    /// A persisted file (manifest, cache, model, artifacts) is malformed.
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// A computation produced a non-finite value or failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    /// Build an [`Error::Io`] from a path and source error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Build an [`Error::Format`] from a path and reason.
    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}
