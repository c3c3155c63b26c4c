//! Native JSON rig format: an array of
//! `{view_id, image_name, fx, fy, cx, cy, width, height, R_c2w, t_c2w}` objects
//! with `R_c2w` as 9 row-major numbers.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraError, CameraView};
use crate::colmap::check_unique_names;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonCamera {
    view_id: u32,
    image_name: String,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    #[serde(rename = "R_c2w")]
    r_c2w: [f64; 9],
    t_c2w: [f64; 3],
}

impl From<&CameraView> for JsonCamera {
    fn from(v: &CameraView) -> Self {
        let r = &v.r_c2w;
        Self {
            view_id: v.view_id,
            image_name: v.image_name.clone(),
            fx: v.fx,
            fy: v.fy,
            cx: v.cx,
            cy: v.cy,
            width: v.width,
            height: v.height,
            r_c2w: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            t_c2w: [v.t_c2w.x, v.t_c2w.y, v.t_c2w.z],
        }
    }
}

impl From<JsonCamera> for CameraView {
    fn from(j: JsonCamera) -> Self {
        CameraView {
            view_id: j.view_id,
            image_name: j.image_name,
            fx: j.fx,
            fy: j.fy,
            cx: j.cx,
            cy: j.cy,
            width: j.width,
            height: j.height,
            r_c2w: Matrix3::from_row_slice(&j.r_c2w),
            t_c2w: Vector3::from(j.t_c2w),
        }
    }
}

pub fn parse_cameras_json(text: &str) -> Result<Vec<CameraView>, CameraError> {
    let raw: Vec<JsonCamera> = serde_json::from_str(text)?;
    let views: Vec<CameraView> = raw.into_iter().map(CameraView::from).collect();
    for v in &views {
        v.validate()?;
    }
    check_unique_names(&views)?;
    Ok(views)
}

pub fn load_cameras_json(path: impl AsRef<Path>) -> Result<Vec<CameraView>, CameraError> {
    parse_cameras_json(&fs::read_to_string(path)?)
}

pub fn cameras_to_json(views: &[CameraView]) -> String {
    let raw: Vec<JsonCamera> = views.iter().map(JsonCamera::from).collect();
    serde_json::to_string_pretty(&raw).expect("camera list serializes")
}

pub fn save_cameras_json(views: &[CameraView], path: impl AsRef<Path>) -> Result<(), CameraError> {
    fs::write(path, cameras_to_json(views))?;
    Ok(())
}
