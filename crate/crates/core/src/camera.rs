//! Calibrated pinhole views stored in camera-to-world form.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Orthonormality tolerance for camera rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("camera '{name}': rotation is not orthonormal (max deviation {deviation:.3e}, det {det:.6})")]
    NonOrthonormalRotation { name: String, deviation: f64, det: f64 },
    #[error("camera '{name}': focal lengths must be positive (fx={fx}, fy={fy})")]
    InvalidIntrinsics { name: String, fx: f64, fy: f64 },
    #[error("camera '{name}': image size must be positive")]
    EmptyImage { name: String },
    #[error("camera {camera_id}: unsupported camera model {model}")]
    UnsupportedCameraModel { camera_id: u32, model: String },
    #[error("image '{image}' references unknown camera {camera_id}")]
    MissingCamera { image: String, camera_id: u32 },
    #[error("duplicate image name '{0}'")]
    DuplicateImage(String),
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: usize, msg: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub view_id: u32,
    /// Key used to pair the view with its mask and image files.
    pub image_name: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub r_c2w: Matrix3<f64>,
    pub t_c2w: Vector3<f64>,
}

impl CameraView {
    /// Zero-skew intrinsic matrix.
    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `(R_w2c, t_w2c)` with `R_w2c = R_c2wᵀ` and `t_w2c = -R_w2c t_c2w`.
    pub fn world_to_camera(&self) -> (Matrix3<f64>, Vector3<f64>) {
        let r = self.r_c2w.transpose();
        let t = -(r * self.t_c2w);
        (r, t)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        self.t_c2w
    }

    /// Builds a view from a world-to-camera pose.
    #[allow(clippy::too_many_arguments)]
    pub fn from_world_to_camera(
        view_id: u32,
        image_name: impl Into<String>,
        (fx, fy, cx, cy): (f64, f64, f64, f64),
        width: u32,
        height: u32,
        r_w2c: Matrix3<f64>,
        t_w2c: Vector3<f64>,
    ) -> Self {
        let r_c2w = r_w2c.transpose();
        Self {
            view_id,
            image_name: image_name.into(),
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            t_c2w: -(r_c2w * t_w2c),
            r_c2w,
        }
    }

    /// A camera at `eye` looking at `target`, with image-down roughly along
    /// `-up` (OpenCV convention: +z forward, +y down).
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        view_id: u32,
        image_name: impl Into<String>,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        focal: f64,
        width: u32,
        height: u32,
    ) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let r_c2w = Matrix3::from_columns(&[right, down, forward]);
        Self {
            view_id,
            image_name: image_name.into(),
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            r_c2w,
            t_c2w: eye,
        }
    }

    /// Checks the view invariants. A principal point outside the image only
    /// logs a warning.
    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(CameraError::InvalidIntrinsics {
                name: self.image_name.clone(),
                fx: self.fx,
                fy: self.fy,
            });
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::EmptyImage {
                name: self.image_name.clone(),
            });
        }
        let deviation = (self.r_c2w.transpose() * self.r_c2w - Matrix3::identity()).amax();
        let det = self.r_c2w.determinant();
        if !(deviation < ROTATION_TOLERANCE) || !((det - 1.0).abs() < ROTATION_TOLERANCE) {
            return Err(CameraError::NonOrthonormalRotation {
                name: self.image_name.clone(),
                deviation,
                det,
            });
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            log::warn!(
                "camera '{}': principal point ({}, {}) outside {}x{} image",
                self.image_name,
                self.cx,
                self.cy,
                self.width,
                self.height
            );
        }
        Ok(())
    }
}
