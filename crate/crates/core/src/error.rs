use std::path::PathBuf;

use thiserror::Error;

use crate::prompts::Label;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Faults raised by a segmentation backend.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("failed to load graph {path}: {message}")]
    GraphLoad { path: PathBuf, message: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("backend config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("geotransform is singular (determinant is zero)")]
    SingularTransform,
    #[error("{path}: missing georeference ({what})")]
    MissingGeoreference { path: PathBuf, what: String },
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("malformed TIFF: {0}")]
    Tiff(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CRS mismatch: source EPSG:{source_code}, target EPSG:{target_code}")]
    CrsMismatch { source_code: u32, target_code: u32 },
    #[error("invalid raster: {0}")]
    InvalidRaster(String),
    #[error("pre-label has no valid coverage")]
    NoCoverage,
    #[error("no {0} pixels available for sampling")]
    AbsentClass(Label),
    #[error("decode needs at least one prompt point")]
    NoPoints,
    #[error("prompt plan is empty")]
    EmptyPlan,
    #[error("backend failure: {0}")]
    Backend(#[from] BackendError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid prompt file: {0}")]
    PromptFile(String),
    #[error("report output: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
