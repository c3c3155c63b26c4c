//! Pinhole projection of Gaussian centers.
//!
//! `x_cam = R_w2c x + t_w2c`, `d = x_cam.z`, `(u, v) = (K x_cam / d)[..2]`.
//! Points with `d <= MIN_DEPTH` or whose pixel falls outside the image are
//! invalid. Pixel `(px, py) = (floor(u), floor(v))`, so pixel (0, 0) covers
//! `[0, 1) × [0, 1)`.

use crate::camera::CameraView;
use crate::cloud::GaussianCloud;

/// Anything this close to (or behind) the image plane is rejected.
pub const MIN_DEPTH: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub px: i64,
    pub py: i64,
    pub depth: f64,
    pub valid: bool,
}

/// Per-view projection constants, flattened for the hot loop.
#[derive(Debug, Clone, Copy)]
pub struct Projector {
    r: [[f64; 3]; 3],
    t: [f64; 3],
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl Projector {
    pub fn new(view: &CameraView) -> Self {
        let (r, t) = view.world_to_camera();
        Self {
            r: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            t: [t.x, t.y, t.z],
            fx: view.fx,
            fy: view.fy,
            cx: view.cx,
            cy: view.cy,
            width: view.width,
            height: view.height,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn project(&self, x: [f64; 3]) -> ProjectedPoint {
        let r = &self.r;
        let cam = [
            r[0][0] * x[0] + r[0][1] * x[1] + r[0][2] * x[2] + self.t[0],
            r[1][0] * x[0] + r[1][1] * x[1] + r[1][2] * x[2] + self.t[1],
            r[2][0] * x[0] + r[2][1] * x[1] + r[2][2] * x[2] + self.t[2],
        ];
        let depth = cam[2];
        if !(depth > MIN_DEPTH) {
            return ProjectedPoint {
                u: f64::NAN,
                v: f64::NAN,
                px: -1,
                py: -1,
                depth,
                valid: false,
            };
        }
        let u = (self.fx * cam[0] + self.cx * depth) / depth;
        let v = (self.fy * cam[1] + self.cy * depth) / depth;
        let valid = u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64;
        ProjectedPoint {
            u,
            v,
            px: u.floor() as i64,
            py: v.floor() as i64,
            depth,
            valid,
        }
    }

    /// `(px, py, depth)` for valid projections only.
    #[inline]
    pub fn pixel(&self, x: [f32; 3]) -> Option<(u32, u32, f64)> {
        let p = self.project([x[0] as f64, x[1] as f64, x[2] as f64]);
        p.valid.then_some((p.px as u32, p.py as u32, p.depth))
    }
}

pub fn project_point(x: [f64; 3], view: &CameraView) -> ProjectedPoint {
    Projector::new(view).project(x)
}

/// Projects every Gaussian center, preserving cloud order.
pub fn project_cloud(cloud: &GaussianCloud, view: &CameraView) -> Vec<ProjectedPoint> {
    let proj = Projector::new(view);
    cloud
        .positions
        .iter()
        .map(|p| proj.project([p[0] as f64, p[1] as f64, p[2] as f64]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SH_REST_DEGREE3;
    use nalgebra::{Matrix3, Matrix3x4, Rotation3, Unit, Vector3, Vector4};
    use proptest::prelude::*;

    fn identity_view() -> CameraView {
        CameraView {
            view_id: 0,
            image_name: "a".into(),
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 40.0,
            width: 100,
            height: 80,
            r_c2w: Matrix3::identity(),
            t_c2w: Vector3::zeros(),
        }
    }

    fn cloud_of(points: &[[f32; 3]]) -> GaussianCloud {
        let mut c = GaussianCloud::with_capacity(points.len(), SH_REST_DEGREE3);
        for p in points {
            c.push(*p, [0.0; 3], &[0.0; SH_REST_DEGREE3], 0.0, [0.0; 3], [1.0, 0.0, 0.0, 0.0]);
        }
        c
    }

    /// P = K [R | t] applied to homogeneous coordinates.
    fn homogeneous_oracle(x: [f64; 3], view: &CameraView) -> (f64, f64, f64) {
        let (r, t) = view.world_to_camera();
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        let p = view.intrinsics() * rt;
        let h = p * Vector4::new(x[0], x[1], x[2], 1.0);
        (h.x / h.z, h.y / h.z, h.z)
    }

    #[test]
    fn principal_ray() {
        let p = project_point([0.0, 0.0, 2.0], &identity_view());
        assert_eq!((p.u, p.v, p.depth, p.valid), (50.0, 40.0, 2.0, true));
        assert_eq!((p.px, p.py), (50, 40));
    }

    #[test]
    fn behind_and_on_plane_rejected() {
        assert!(!project_point([0.0, 0.0, -1.0], &identity_view()).valid);
        assert!(!project_point([0.0, 0.0, 0.0], &identity_view()).valid);
        assert!(!project_point([0.0, 0.0, 1e-9], &identity_view()).valid);
    }

    #[test]
    fn image_bounds_are_half_open() {
        let v = identity_view();
        // u = 100 * x / 1 + 50: x = 0.5 lands exactly on u = 100 (outside)
        assert!(!project_point([0.5, 0.0, 1.0], &v).valid);
        let inside = project_point([0.49, 0.0, 1.0], &v);
        assert!(inside.valid);
        assert_eq!(inside.px, 99);
        let left = project_point([-0.5, -0.4, 1.0], &v);
        assert!(left.valid);
        assert_eq!((left.px, left.py), (0, 0));
    }

    #[test]
    fn empty_and_all_behind_clouds() {
        assert!(project_cloud(&cloud_of(&[]), &identity_view()).is_empty());
        let behind = project_cloud(&cloud_of(&[[0.0, 0.0, -1.0]; 3]), &identity_view());
        assert_eq!(behind.len(), 3);
        assert!(behind.iter().all(|p| !p.valid));
    }

    fn arb_view() -> impl Strategy<Value = CameraView> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            -3.0f64..3.0,
            prop::array::uniform3(-3.0f64..3.0),
        )
            .prop_map(|(axis, angle, t)| {
                let axis = Unit::new_normalize(Vector3::from(axis) + Vector3::new(0.0, 0.0, 1e-3));
                CameraView {
                    r_c2w: *Rotation3::from_axis_angle(&axis, angle).matrix(),
                    t_c2w: Vector3::from(t),
                    ..identity_view()
                }
            })
    }

    proptest! {
        #[test]
        fn matches_homogeneous_oracle(view in arb_view(), x in prop::array::uniform3(-5.0f64..5.0)) {
            let p = project_point(x, &view);
            let (u, v, d) = homogeneous_oracle(x, &view);
            prop_assert!((p.depth - d).abs() < 1e-8);
            if d > 1e-6 {
                prop_assert!((p.u - u).abs() < 1e-5 * u.abs().max(1.0));
                prop_assert!((p.v - v).abs() < 1e-5 * v.abs().max(1.0));
            }
            if d <= 0.0 {
                prop_assert!(!p.valid);
            }
        }

        #[test]
        fn scene_scaling_scales_depth_only(view in arb_view(), x in prop::array::uniform3(-5.0f64..5.0), s in 0.1f64..10.0) {
            let p = project_point(x, &view);
            prop_assume!(p.depth > 1e-3);
            let scaled_view = CameraView { t_c2w: view.t_c2w * s, ..view.clone() };
            let q = project_point([x[0] * s, x[1] * s, x[2] * s], &scaled_view);
            prop_assert!((q.depth - p.depth * s).abs() < 1e-9 * s.max(1.0) * p.depth.max(1.0));
            prop_assert!((q.u - p.u).abs() < 1e-5);
            prop_assert!((q.v - p.v).abs() < 1e-5);
        }
    }

    #[test]
    fn project_cloud_is_deterministic_and_ordered() {
        let pts: Vec<[f32; 3]> = (0..500)
            .map(|i| {
                let f = i as f32;
                [(f * 0.37).sin(), (f * 0.11).cos(), (f * 0.05).sin() * 3.0]
            })
            .collect();
        let cloud = cloud_of(&pts);
        let a = project_cloud(&cloud, &identity_view());
        let b = project_cloud(&cloud, &identity_view());
        for (i, (p, q)) in a.iter().zip(&b).enumerate() {
            assert_eq!(p.u.to_bits(), q.u.to_bits());
            let x = pts[i].map(|c| c as f64);
            assert_eq!(p.valid, project_point(x, &identity_view()).valid);
        }
    }
}
