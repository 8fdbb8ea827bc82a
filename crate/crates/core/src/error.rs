use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("depths must be strictly increasing: {0}")]
    NonMonotoneDepths(String),
    #[error("negative intensity {value} at sample {index}")]
    NegativeIntensity { index: usize, value: f64 },
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("numerical aperture must lie in (0, 1), got {0}")]
    InvalidNa(f64),
    #[error("eta = {0} is not an angular sample of this light field")]
    EtaNotSampled(f64),
    #[error("focal depth {0} mm does not coincide with any scene slice depth")]
    DepthMismatch(f64),

    #[error("missing metadata: {0}")]
    MissingMetadata(String),
    #[error("mixed image dimensions: {0}")]
    MixedDimensions(String),
    #[error("unsupported bit depth in {0}")]
    UnsupportedBitDepth(PathBuf),
    #[error("bad magic number, not an LF4D file")]
    BadMagic,
    #[error("unsupported LF4D version {0}")]
    VersionUnsupported(u16),
    #[error("truncated file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
