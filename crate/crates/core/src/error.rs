use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("PNG decode failed: {0}")]
    PngDecode(String),

    #[error("PNG encode failed: {0}")]
    PngEncode(String),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value {0}")]
    NonFinite(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("message does not fit: {0}")]
    Capacity(String),

    #[error("no feasible QR placement: {0}")]
    Placement(String),

    #[error("QR encoding failed: {0}")]
    QrEncode(String),

    #[error("extraction failed: {0}")]
    ExtractionFailed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
