//! COLMAP text model (`cameras.txt` / `images.txt`) reader and writer.
//!
//! COLMAP stores world-to-camera poses as a Hamilton quaternion `(qw, qx, qy,
//! qz)` plus translation; views are converted to camera-to-world on load.
//! Only undistorted pinhole intrinsics are usable. Distortion models are
//! accepted only when every distortion coefficient is exactly zero.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};

use crate::camera::{CameraError, CameraView};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Intrinsics {
    width: u32,
    height: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> CameraError {
    CameraError::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

fn numbers<T: std::str::FromStr>(tokens: &[&str], file: &str, line: usize) -> Result<Vec<T>, CameraError> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| parse_err(file, line, format!("cannot parse '{t}'")))
        })
        .collect()
}

fn parse_cameras(text: &str) -> Result<HashMap<u32, Intrinsics>, CameraError> {
    const FILE: &str = "cameras.txt";
    let mut cams = HashMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 4 {
            return Err(parse_err(FILE, ln + 1, "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]"));
        }
        let id: u32 = numbers(&tokens[..1], FILE, ln + 1)?[0];
        let size: Vec<u32> = numbers(&tokens[2..4], FILE, ln + 1)?;
        let params: Vec<f64> = numbers(&tokens[4..], FILE, ln + 1)?;
        let model = tokens[1];
        let unsupported = || CameraError::UnsupportedCameraModel {
            camera_id: id,
            model: model.to_string(),
        };
        let expect = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(parse_err(
                    FILE,
                    ln + 1,
                    format!("{model} takes {n} parameters, found {}", params.len()),
                ))
            }
        };
        let zero_tail = |from: usize| params[from..].iter().all(|&k| k == 0.0);
        let (fx, fy, cx, cy) = match model {
            "SIMPLE_PINHOLE" => {
                expect(3)?;
                (params[0], params[0], params[1], params[2])
            }
            "PINHOLE" => {
                expect(4)?;
                (params[0], params[1], params[2], params[3])
            }
            "SIMPLE_RADIAL" | "RADIAL" => {
                expect(if model == "RADIAL" { 5 } else { 4 })?;
                if !zero_tail(3) {
                    return Err(unsupported());
                }
                (params[0], params[0], params[1], params[2])
            }
            "OPENCV" => {
                expect(8)?;
                if !zero_tail(4) {
                    return Err(unsupported());
                }
                (params[0], params[1], params[2], params[3])
            }
            _ => return Err(unsupported()),
        };
        cams.insert(
            id,
            Intrinsics {
                width: size[0],
                height: size[1],
                fx,
                fy,
                cx,
                cy,
            },
        );
    }
    Ok(cams)
}

/// Rotation matrix of a (possibly slightly unnormalized) Hamilton quaternion.
pub fn quaternion_to_rotation(qw: f64, qx: f64, qy: f64, qz: f64) -> Matrix3<f64> {
    let q = UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz));
    *q.to_rotation_matrix().matrix()
}

/// Hamilton quaternion `(qw, qx, qy, qz)` with `qw >= 0`.
pub fn rotation_to_quaternion(r: &Matrix3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let q = q.quaternion();
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}

fn parse_images(text: &str, cams: &HashMap<u32, Intrinsics>) -> Result<Vec<CameraView>, CameraError> {
    const FILE: &str = "images.txt";
    let mut views = Vec::new();
    let mut lines = text.lines().enumerate();
    while let Some((ln, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 10 {
            return Err(parse_err(
                FILE,
                ln + 1,
                "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME",
            ));
        }
        let image_id: u32 = numbers(&tokens[..1], FILE, ln + 1)?[0];
        let pose: Vec<f64> = numbers(&tokens[1..8], FILE, ln + 1)?;
        let camera_id: u32 = numbers(&tokens[8..9], FILE, ln + 1)?[0];
        // Names may contain spaces; everything after CAMERA_ID is the name.
        let name = tokens[9..].join(" ");
        // The following line lists 2D points (possibly empty) and is skipped.
        lines.next();

        let k = cams.get(&camera_id).ok_or_else(|| CameraError::MissingCamera {
            image: name.clone(),
            camera_id,
        })?;
        let r_w2c = quaternion_to_rotation(pose[0], pose[1], pose[2], pose[3]);
        let t_w2c = Vector3::new(pose[4], pose[5], pose[6]);
        let view = CameraView::from_world_to_camera(
            image_id,
            name,
            (k.fx, k.fy, k.cx, k.cy),
            k.width,
            k.height,
            r_w2c,
            t_w2c,
        );
        view.validate()?;
        views.push(view);
    }
    Ok(views)
}

/// Loads all views from `dir/cameras.txt` and `dir/images.txt`, sorted by image id.
pub fn load_colmap_text(dir: impl AsRef<Path>) -> Result<Vec<CameraView>, CameraError> {
    let dir = dir.as_ref();
    let cams = parse_cameras(&fs::read_to_string(dir.join("cameras.txt"))?)?;
    let mut views = parse_images(&fs::read_to_string(dir.join("images.txt"))?, &cams)?;
    views.sort_by_key(|v| v.view_id);
    check_unique_names(&views)?;
    Ok(views)
}

pub(crate) fn check_unique_names(views: &[CameraView]) -> Result<(), CameraError> {
    let mut seen = std::collections::HashSet::new();
    for v in views {
        if !seen.insert(v.image_name.as_str()) {
            return Err(CameraError::DuplicateImage(v.image_name.clone()));
        }
    }
    Ok(())
}

/// Writes one PINHOLE camera per view (camera id = view id) and the matching
/// image poses. 2D point lines are left empty.
pub fn write_colmap_text(dir: impl AsRef<Path>, views: &[CameraView]) -> Result<(), CameraError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut cameras = String::from(
        "# Camera list with one line of data per camera:\n#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n",
    );
    let _ = writeln!(cameras, "# Number of cameras: {}", views.len());
    let mut images = String::from(
        "# Image list with two lines of data per image:\n#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n#   POINTS2D[] as (X, Y, POINT3D_ID)\n",
    );
    let _ = writeln!(images, "# Number of images: {}", views.len());
    for v in views {
        let _ = writeln!(
            cameras,
            "{} PINHOLE {} {} {} {} {} {}",
            v.view_id, v.width, v.height, v.fx, v.fy, v.cx, v.cy
        );
        let (r, t) = v.world_to_camera();
        let q = rotation_to_quaternion(&r);
        let _ = writeln!(
            images,
            "{} {} {} {} {} {} {} {} {} {}\n",
            v.view_id, q[0], q[1], q[2], q[3], t.x, t.y, t.z, v.view_id, v.image_name
        );
    }
    fs::write(dir.join("cameras.txt"), cameras)?;
    fs::write(dir.join("images.txt"), images)?;
    Ok(())
}
