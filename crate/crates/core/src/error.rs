use thiserror::Error;

use crate::camera::CameraError;
use crate::cloud::LengthMismatch;
use crate::mask::MaskError;
use crate::outlier::OutlierError;
use crate::ply::PlyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model: {0}")]
    Ply(#[from] PlyError),
    #[error("cameras: {0}")]
    Camera(#[from] CameraError),
    #[error("masks: {0}")]
    Mask(#[from] MaskError),
    #[error("stage {stage}: {source}")]
    Outlier {
        stage: &'static str,
        #[source]
        source: OutlierError,
    },
    #[error("stage {stage} would remove {removed} of {input} gaussians (limit {limit:.1}%); check mask pairing or parameters")]
    StageGuard {
        stage: &'static str,
        removed: usize,
        input: usize,
        limit: f64,
    },
    #[error("no masked views paired with the camera rig")]
    NoMaskedViews,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    LengthMismatch(#[from] LengthMismatch),
    #[error("worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
    #[error("report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image {path}: {source}")]
    Image {
        path: String,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
