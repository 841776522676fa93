use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classification used by front ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The inputs were readable but violate a contract.
    Validation,
    /// A file could not be read, written or decoded.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: file not found")]
    NotFound { path: PathBuf },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed PNG: {reason}")]
    MalformedPng { path: PathBuf, reason: String },

    #[error("{path}: unsupported PNG layout: {reason}")]
    UnsupportedPng { path: PathBuf, reason: String },

    #[error("{path}: bad PFM magic {magic:?}, expected \"PF\" or \"Pf\"")]
    PfmBadMagic { path: PathBuf, magic: String },

    #[error("{path}: bad PFM header: {reason}")]
    PfmHeader { path: PathBuf, reason: String },

    #[error("{path}: truncated PFM payload, expected {expected} bytes, found {found}")]
    PfmTruncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: PFM scale is zero")]
    PfmZeroScale { path: PathBuf },

    #[error("{path}: parse error: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("{path}: missing required file")]
    MissingFile { path: PathBuf },

    #[error("dimension mismatch: {left} is {}x{} but {right} is {}x{}", left_dims.0, left_dims.1, right_dims.0, right_dims.1)]
    DimensionMismatch {
        left: String,
        left_dims: (usize, usize),
        right: String,
        right_dims: (usize, usize),
    },

    #[error("{what}: expected {expected} channel(s), found {found}")]
    ChannelMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("{what}: {reason}")]
    InvalidValue { what: String, reason: String },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("direction vector has zero length")]
    ZeroDirection,

    #[error("environment map has zero total luminance; importance sampling is unavailable")]
    DegenerateEnvironment,

    #[error("{what} is not finite")]
    NonFinite { what: String },

    #[error("{file} has {rows} rows but the episode has {frames} frames")]
    RowCount {
        file: String,
        rows: usize,
        frames: usize,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotFound { .. }
            | Error::Io { .. }
            | Error::MalformedPng { .. }
            | Error::UnsupportedPng { .. }
            | Error::PfmBadMagic { .. }
            | Error::PfmHeader { .. }
            | Error::PfmTruncated { .. }
            | Error::PfmZeroScale { .. }
            | Error::Parse { .. }
            | Error::MissingFile { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound { path }
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::InvalidValue {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(
        left: impl Into<String>,
        left_dims: (usize, usize),
        right: impl Into<String>,
        right_dims: (usize, usize),
    ) -> Error {
        Error::DimensionMismatch {
            left: left.into(),
            left_dims,
            right: right.into(),
            right_dims,
        }
    }
}
