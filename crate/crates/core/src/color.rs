//! Stage 2: depth-buffered color validation.
//!
//! For every masked view, the nearest kept Gaussian at each pixel is the
//! front layer. Its SH DC color is compared with the masked image at every
//! object pixel it wins. A Gaussian survives if it never won an object pixel
//! in any view, or if at least one won pixel matches within `tau`.

use rayon::prelude::*;

use crate::camera::CameraView;
use crate::cloud::GaussianCloud;
use crate::mask::{MaskSet, MaskedView};
use crate::projection::Projector;

/// Degree-0 spherical harmonic constant.
pub const SH_C0: f64 = 0.28209479;

const EMPTY: u32 = u32::MAX;

/// Per-pixel front-most kept Gaussian for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthBuffer {
    pub width: u32,
    pub height: u32,
    winner: Vec<u32>,
    depth: Vec<f64>,
}

impl DepthBuffer {
    fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            winner: vec![EMPTY; n],
            depth: vec![f64::INFINITY; n],
        }
    }

    #[inline]
    pub fn winner(&self, x: u32, y: u32) -> Option<usize> {
        let w = self.winner[y as usize * self.width as usize + x as usize];
        (w != EMPTY).then_some(w as usize)
    }

    #[inline]
    pub fn depth(&self, x: u32, y: u32) -> Option<f64> {
        let i = y as usize * self.width as usize + x as usize;
        (self.winner[i] != EMPTY).then_some(self.depth[i])
    }

    pub fn occupied(&self) -> usize {
        self.winner.iter().filter(|&&w| w != EMPTY).count()
    }
}

/// Nearest kept Gaussian per pixel. Equal depths go to the lower index.
pub fn build_depth_buffer(cloud: &GaussianCloud, keep: &[bool], view: &CameraView) -> DepthBuffer {
    assert_eq!(keep.len(), cloud.len(), "keep-vector length");
    let proj = Projector::new(view);
    let mut buf = DepthBuffer::empty(view.width, view.height);
    let w = view.width as usize;
    // Ascending index order plus a strict comparison gives the tie-break.
    for (i, (&p, _)) in cloud.positions.iter().zip(keep).enumerate().filter(|(_, (_, &k))| k) {
        if let Some((x, y, d)) = proj.pixel(p) {
            let slot = y as usize * w + x as usize;
            if d < buf.depth[slot] {
                buf.depth[slot] = d;
                buf.winner[slot] = i as u32;
            }
        }
    }
    buf
}

/// RGB from the DC coefficients, clamped to `[0, 1]`.
pub fn dc_color(f_dc: [f32; 3]) -> [f64; 3] {
    f_dc.map(|f| (SH_C0 * f as f64 + 0.5).clamp(0.0, 1.0))
}

/// Euclidean RGB distance.
pub fn color_delta(c: [f64; 3], c_mask: [f64; 3]) -> f64 {
    let d = [c[0] - c_mask[0], c[1] - c_mask[1], c[2] - c_mask[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Per-Gaussian counts of views where it was front layer on an object pixel
/// (`rendered_count`) and where one such pixel matched (`match_count`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorEvidence {
    pub rendered_count: Vec<u32>,
    pub match_count: Vec<u32>,
    /// Masked views that had a color image and so contributed evidence.
    pub views_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorOutcome {
    pub keep: Vec<bool>,
    pub evidence: ColorEvidence,
}

/// `(rendered, matched)` index lists for one view, both sorted.
fn view_evidence(cloud: &GaussianCloud, keep: &[bool], entry: &MaskedView, tau: f64) -> Option<(Vec<u32>, Vec<u32>)> {
    let image = entry.masked_image.as_ref()?;
    let buf = build_depth_buffer(cloud, keep, &entry.view);
    let mut rendered = Vec::new();
    let mut matched = Vec::new();
    for y in 0..buf.height {
        for x in 0..buf.width {
            if !entry.mask.get(x, y) {
                continue;
            }
            let Some(g) = buf.winner(x, y) else { continue };
            let c = dc_color(cloud.f_dc[g]);
            let expected = image.get(x, y).map(|v| v as f64);
            rendered.push(g as u32);
            if color_delta(c, expected) < tau {
                matched.push(g as u32);
            }
        }
    }
    for v in [&mut rendered, &mut matched] {
        v.sort_unstable();
        v.dedup();
    }
    Some((rendered, matched))
}

/// Runs color validation over all masked views with images.
pub fn validate_colors(cloud: &GaussianCloud, keep: &[bool], masks: &MaskSet, tau: f64) -> ColorOutcome {
    assert!(tau >= 0.0, "color threshold must be non-negative");
    let n = cloud.len();
    let per_view: Vec<Option<(Vec<u32>, Vec<u32>)>> = masks
        .entries
        .par_iter()
        .map(|e| view_evidence(cloud, keep, e, tau))
        .collect();

    let mut evidence = ColorEvidence {
        rendered_count: vec![0; n],
        match_count: vec![0; n],
        views_evaluated: 0,
    };
    for (rendered, matched) in per_view.into_iter().flatten() {
        evidence.views_evaluated += 1;
        for g in rendered {
            evidence.rendered_count[g as usize] += 1;
        }
        for g in matched {
            evidence.match_count[g as usize] += 1;
        }
    }

    let keep = keep
        .iter()
        .zip(evidence.rendered_count.iter().zip(&evidence.match_count))
        .map(|(&k, (&r, &m))| k && (r == 0 || m >= 1))
        .collect();
    ColorOutcome { keep, evidence }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SH_REST_DEGREE3;
    use crate::mask::{BinaryMask, RgbImage};
    use nalgebra::{Matrix3, Vector3};

    fn view() -> CameraView {
        CameraView {
            view_id: 0,
            image_name: "v".into(),
            fx: 10.0,
            fy: 10.0,
            cx: 4.0,
            cy: 4.0,
            width: 8,
            height: 8,
            r_c2w: Matrix3::identity(),
            t_c2w: Vector3::zeros(),
        }
    }

    fn cloud(points: &[([f32; 3], [f32; 3])]) -> GaussianCloud {
        let mut c = GaussianCloud::with_capacity(points.len(), SH_REST_DEGREE3);
        for (p, dc) in points {
            c.push(*p, *dc, &[0.0; SH_REST_DEGREE3], 0.0, [0.0; 3], [1.0, 0.0, 0.0, 0.0]);
        }
        c
    }

    fn solid(rgb: [u8; 3]) -> RgbImage {
        RgbImage::from_rgb8(&image::RgbImage::from_pixel(8, 8, image::Rgb(rgb)))
    }

    /// DC coefficient whose color is exactly `c` before clamping.
    fn dc_for(c: f32) -> f32 {
        ((c as f64 - 0.5) / SH_C0) as f32
    }

    #[test]
    fn constant_is_pinned() {
        assert_eq!(SH_C0, 0.28209479);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn dc_color_values() {
        assert_eq!(dc_color([0.0; 3]), [0.5; 3]);
        // C0 * f + 0.5 = 1  =>  f = 0.5 / C0
        let f_white = 0.5 / SH_C0;
        assert!((f_white - 1.772_453_9).abs() < 1e-6);
        for c in dc_color([1.772_453_85; 3]) {
            assert!((c - 1.0).abs() < 1e-7, "{c}");
        }
        assert_eq!(dc_color([1.8; 3]), [1.0; 3]);
        assert_eq!(dc_color([-100.0, 100.0, 0.0]), [0.0, 1.0, 0.5]);
    }

    #[test]
    fn delta_values() {
        assert_eq!(color_delta([0.2; 3], [0.2; 3]), 0.0);
        assert!((color_delta([0.0; 3], [1.0; 3]) - 3f64.sqrt()).abs() < 1e-15);
        let d = color_delta([0.5, 0.5, 0.5], [0.9, 0.5, 0.5]);
        assert_eq!(d, 0.4);
        assert!(!(d < 0.4), "exact threshold must not count as a match");
    }

    #[test]
    fn nearer_gaussian_wins() {
        let c = cloud(&[([0.0, 0.0, 3.0], [0.0; 3]), ([0.0, 0.0, 2.0], [0.0; 3])]);
        let buf = build_depth_buffer(&c, &[true, true], &view());
        assert_eq!(buf.winner(4, 4), Some(1));
        assert_eq!(buf.depth(4, 4), Some(2.0));
        assert_eq!(buf.occupied(), 1);
        // removed Gaussians do not participate
        let buf = build_depth_buffer(&c, &[true, false], &view());
        assert_eq!(buf.winner(4, 4), Some(0));
    }

    #[test]
    fn ties_go_to_lower_index() {
        let c = cloud(&[([0.0, 0.0, 2.0], [0.0; 3]), ([0.0, 0.0, 2.0], [0.0; 3])]);
        assert_eq!(build_depth_buffer(&c, &[true, true], &view()).winner(4, 4), Some(0));
    }

    #[test]
    fn nothing_in_view() {
        let c = cloud(&[([0.0, 0.0, -2.0], [0.0; 3]), ([100.0, 0.0, 2.0], [0.0; 3])]);
        let buf = build_depth_buffer(&c, &[true, true], &view());
        assert_eq!(buf.occupied(), 0);
        assert_eq!(buf.winner(0, 0), None);
    }

    fn set_with(mask: BinaryMask, img: Option<RgbImage>) -> MaskSet {
        MaskSet::new(vec![MaskedView::new(view(), mask, img).unwrap()]).unwrap()
    }

    #[test]
    fn occluded_gaussian_is_kept() {
        // red image; front Gaussian is red, the one behind it is blue
        let c = cloud(&[
            ([0.0, 0.0, 2.0], [dc_for(1.0), dc_for(0.0), dc_for(0.0)]),
            ([0.0, 0.0, 5.0], [dc_for(0.0), dc_for(0.0), dc_for(1.0)]),
        ]);
        let masks = set_with(BinaryMask::new(8, 8, true), Some(solid([255, 0, 0])));
        let out = validate_colors(&c, &[true, true], &masks, 0.4);
        assert_eq!(out.keep, vec![true, true]);
        assert_eq!(out.evidence.rendered_count, vec![1, 0]);
        assert_eq!(out.evidence.match_count, vec![1, 0]);
    }

    #[test]
    fn mismatching_front_gaussian_is_removed() {
        let c = cloud(&[
            ([0.0, 0.0, 2.0], [dc_for(0.0), dc_for(1.0), dc_for(0.0)]),
            ([0.0, 0.0, 5.0], [dc_for(1.0), dc_for(0.0), dc_for(0.0)]),
        ]);
        let masks = set_with(BinaryMask::new(8, 8, true), Some(solid([255, 0, 0])));
        let out = validate_colors(&c, &[true, true], &masks, 0.4);
        assert_eq!(out.keep, vec![false, true]);
        assert_eq!(out.evidence.views_evaluated, 1);
    }

    #[test]
    fn background_pixels_give_no_evidence() {
        let c = cloud(&[([0.0, 0.0, 2.0], [dc_for(0.0), dc_for(1.0), dc_for(0.0)])]);
        let mut mask = BinaryMask::new(8, 8, false);
        mask.set(0, 0, true);
        let out = validate_colors(&c, &[true], &set_with(mask, Some(solid([255, 0, 0]))), 0.4);
        assert_eq!(out.keep, vec![true]);
        assert_eq!(out.evidence.rendered_count, vec![0]);
    }

    #[test]
    fn views_without_images_are_skipped() {
        let c = cloud(&[([0.0, 0.0, 2.0], [dc_for(0.0), dc_for(1.0), dc_for(0.0)])]);
        let out = validate_colors(&c, &[true], &set_with(BinaryMask::new(8, 8, true), None), 0.4);
        assert_eq!(out.keep, vec![true]);
        assert_eq!(out.evidence.views_evaluated, 0);
    }

    #[test]
    fn one_matching_pixel_suffices() {
        // A single Gaussian cannot win two pixels, so use two views: one
        // mismatching, one matching.
        let c = cloud(&[([0.0, 0.0, 2.0], [dc_for(1.0), dc_for(0.0), dc_for(0.0)])]);
        let red = MaskedView::new(view(), BinaryMask::new(8, 8, true), Some(solid([255, 0, 0]))).unwrap();
        let mut other = view();
        other.image_name = "w".into();
        let green = MaskedView::new(other, BinaryMask::new(8, 8, true), Some(solid([0, 255, 0]))).unwrap();
        let masks = MaskSet::new(vec![green, red]).unwrap();
        let out = validate_colors(&c, &[true], &masks, 0.4);
        assert_eq!(out.keep, vec![true]);
        assert_eq!(out.evidence.rendered_count, vec![2]);
        assert_eq!(out.evidence.match_count, vec![1]);

        let out = validate_colors(&c, &[true], &masks, 0.0);
        assert_eq!(out.keep, vec![false]);
    }
}
