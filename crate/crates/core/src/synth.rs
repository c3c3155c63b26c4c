//! Labeled synthetic scenes: an object blob, a background shell and floaters
//! between the cameras and the object, with masks rasterized from the object.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::cloud::{GaussianCloud, SH_REST_DEGREE3};
use crate::color::SH_C0;
use crate::error::{Error, Result};
use crate::mask::{BinaryMask, MaskSet, MaskedView, RgbImage};
use crate::projection::Projector;
use crate::{colmap, ply, rig_json};

pub const OBJECT_COLOR: [f64; 3] = [0.80, 0.55, 0.30];
const VISIBLE_BIT: u8 = 0x80;
const MAX_REJECTIONS_PER_POINT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Object = 0,
    Background = 1,
    Floater = 2,
}

/// Ground truth for one Gaussian. `mask_visible` is set when it projects onto
/// an object pixel of at least one masked view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Label {
    pub category: Category,
    pub mask_visible: bool,
}

impl Label {
    pub fn to_byte(self) -> u8 {
        self.category as u8 | if self.mask_visible { VISIBLE_BIT } else { 0 }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        let category = match b & !VISIBLE_BIT {
            0 => Category::Object,
            1 => Category::Background,
            2 => Category::Floater,
            _ => return None,
        };
        Some(Self {
            category,
            mask_visible: b & VISIBLE_BIT != 0,
        })
    }
}

pub fn write_labels(labels: &[Label], path: &Path) -> Result<()> {
    let bytes: Vec<u8> = labels.iter().map(|l| l.to_byte()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<Label>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    bytes
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            Label::from_byte(b)
                .ok_or_else(|| Error::InvalidScene(format!("{}: bad label byte {b:#04x} at {i}", path.display())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_object: usize,
    pub n_background: usize,
    pub n_floaters: usize,
    pub ring_views: usize,
    pub mask_views: usize,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub ring_radius: f64,
    pub ring_height: f64,
    /// Semi-axes of the object ellipsoid.
    pub object_radii: [f64; 3],
    pub background_radii: [f64; 2],
    /// Radius in pixels of the disk rasterized around each object Gaussian.
    pub disk_radius: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_object: 5_000,
            n_background: 15_000,
            n_floaters: 2_000,
            ring_views: 12,
            mask_views: 3,
            width: 256,
            height: 192,
            focal: 256.0,
            ring_radius: 4.0,
            ring_height: 0.8,
            object_radii: [0.9, 0.7, 0.8],
            background_radii: [6.0, 10.0],
            disk_radius: 3.0,
        }
    }
}

impl SceneSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidScene(m));
        if self.ring_views == 0 {
            return fail("ring_views must be positive".into());
        }
        if self.mask_views == 0 || self.mask_views > self.ring_views {
            return fail(format!(
                "mask_views must be in 1..={}, got {}",
                self.ring_views, self.mask_views
            ));
        }
        if self.width == 0 || self.height == 0 || !(self.focal > 0.0) {
            return fail("image size and focal length must be positive".into());
        }
        if self.object_radii.iter().any(|&r| !(r > 0.0)) || !(self.ring_radius > self.object_radii.iter().cloned().fold(0.0, f64::max)) {
            return fail("the camera ring must lie outside the object".into());
        }
        if !(self.background_radii[0] > 0.0 && self.background_radii[0] <= self.background_radii[1]) {
            return fail("background radii must satisfy 0 < inner <= outer".into());
        }
        if !(self.disk_radius >= 1.0) {
            return fail("disk radius must be at least one pixel".into());
        }
        Ok(())
    }

    /// Ring indices of the masked views, evenly spaced.
    pub fn masked_indices(&self) -> Vec<usize> {
        (0..self.mask_views)
            .map(|i| i * self.ring_views / self.mask_views)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub cloud: GaussianCloud,
    pub labels: Vec<Label>,
    pub rig: Vec<CameraView>,
    pub masks: MaskSet,
    /// 8-bit masked color images, parallel to `masks.entries`.
    pub masked_images: Vec<image::RgbImage>,
}

pub fn view_name(i: usize) -> String {
    format!("view_{i:03}.png")
}

pub fn ring_rig(spec: &SceneSpec) -> Vec<CameraView> {
    (0..spec.ring_views)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / spec.ring_views as f64;
            let eye = Vector3::new(
                spec.ring_radius * theta.cos(),
                spec.ring_radius * theta.sin(),
                spec.ring_height,
            );
            CameraView::look_at(
                i as u32,
                view_name(i),
                eye,
                Vector3::zeros(),
                Vector3::z(),
                spec.focal,
                spec.width,
                spec.height,
            )
        })
        .collect()
}

/// Inverse of the DC color mapping for colors in `[0, 1]`.
pub fn dc_for_color(c: [f64; 3]) -> [f32; 3] {
    c.map(|v| ((v - 0.5) / SH_C0) as f32)
}

fn quantize(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
}

struct Point {
    position: [f32; 3],
    color: [f64; 3],
    category: Category,
}

fn uniform_in_ellipsoid(rng: &mut ChaCha8Rng, radii: [f64; 3]) -> [f64; 3] {
    loop {
        let p: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        if p.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return [p[0] * radii[0], p[1] * radii[1], p[2] * radii[2]];
        }
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let p = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = p.norm();
        if n > 1e-3 && n <= 1.0 {
            return p / n;
        }
    }
}

fn to_f32(p: [f64; 3]) -> [f32; 3] {
    p.map(|v| v as f32)
}

/// Z-buffered disks around projected object Gaussians.
fn rasterize(spec: &SceneSpec, view: &CameraView, object: &[Point]) -> (BinaryMask, image::RgbImage) {
    let (w, h) = (spec.width as usize, spec.height as usize);
    let proj = Projector::new(view);
    let mut mask = BinaryMask::new(spec.width, spec.height, false);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut img = image::RgbImage::new(spec.width, spec.height);
    let r = spec.disk_radius;
    for p in object {
        let q = proj.project(p.position.map(|v| v as f64));
        if !q.valid {
            continue;
        }
        let rgb = image::Rgb(quantize(p.color));
        let x0 = (q.u - r).floor().max(0.0) as usize;
        let y0 = (q.v - r).floor().max(0.0) as usize;
        let x1 = ((q.u + r).ceil() as usize).min(w - 1);
        let y1 = ((q.v + r).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 + 0.5 - q.u;
                let dy = y as f64 + 0.5 - q.v;
                if dx * dx + dy * dy > r * r {
                    continue;
                }
                mask.set(x as u32, y as u32, true);
                let z = &mut zbuf[y * w + x];
                if q.depth < *z {
                    *z = q.depth;
                    img.put_pixel(x as u32, y as u32, rgb);
                }
            }
        }
    }
    (mask, img)
}

fn on_any_mask(position: [f32; 3], projectors: &[Projector], masks: &[BinaryMask]) -> bool {
    projectors.iter().zip(masks).any(|(proj, mask)| match proj.pixel(position) {
        Some((x, y, _)) => mask.get(x, y),
        None => false,
    })
}

/// Generates a scene. The same spec always yields bit-identical output.
pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rig = ring_rig(spec);
    let masked_idx = spec.masked_indices();

    let object: Vec<Point> = (0..spec.n_object)
        .map(|_| {
            let p = uniform_in_ellipsoid(&mut rng, spec.object_radii);
            // vertical gradient plus per-point noise around the base color
            let shade = 0.06 * p[2] / spec.object_radii[2];
            let color = std::array::from_fn(|c| OBJECT_COLOR[c] + shade + rng.random_range(-0.04..0.04));
            Point {
                position: to_f32(p),
                color,
                category: Category::Object,
            }
        })
        .collect();

    let mut bin_masks = Vec::with_capacity(masked_idx.len());
    let mut images = Vec::with_capacity(masked_idx.len());
    for &i in &masked_idx {
        let (m, img) = rasterize(spec, &rig[i], &object);
        if m.count_true() == 0 {
            return Err(Error::InvalidScene(format!("object is not visible in masked view {i}")));
        }
        bin_masks.push(m);
        images.push(img);
    }
    let projectors: Vec<Projector> = masked_idx.iter().map(|&i| Projector::new(&rig[i])).collect();

    let mut points = object;
    let [inner, outer] = spec.background_radii;
    for _ in 0..spec.n_background {
        let mut tries = 0;
        let position = loop {
            let radius = rng.random_range(inner..=outer);
            let p = to_f32((unit_vector(&mut rng) * radius).into());
            if !on_any_mask(p, &projectors, &bin_masks) {
                break p;
            }
            tries += 1;
            if tries > MAX_REJECTIONS_PER_POINT {
                return Err(Error::InvalidScene("background shell is covered by the masks".into()));
            }
        };
        let color = [
            rng.random_range(0.05..0.35),
            rng.random_range(0.45..0.85),
            rng.random_range(0.35..0.95),
        ];
        points.push(Point {
            position,
            color,
            category: Category::Background,
        });
    }

    for _ in 0..spec.n_floaters {
        let eye = rig[rng.random_range(0..rig.len())].center();
        let t = rng.random_range(0.15..0.85);
        let jitter = Vector3::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
        );
        let p = eye * (1.0 - t) + jitter;
        let color = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        points.push(Point {
            position: to_f32(p.into()),
            color,
            category: Category::Floater,
        });
    }

    points.shuffle(&mut rng);

    let mut cloud = GaussianCloud::with_capacity(points.len(), SH_REST_DEGREE3);
    cloud.comments.push(format!("synthetic scene seed={}", spec.seed));
    let mut rest = [0f32; SH_REST_DEGREE3];
    let mut labels = Vec::with_capacity(points.len());
    for p in &points {
        for r in rest.iter_mut() {
            *r = rng.random_range(-0.05..0.05);
        }
        let s = rng.random_range(-4.5f32..-3.5);
        let q = unit_vector(&mut rng);
        let angle = rng.random_range(0.0..std::f64::consts::PI) / 2.0;
        let rot = [
            angle.cos() as f32,
            (q.x * angle.sin()) as f32,
            (q.y * angle.sin()) as f32,
            (q.z * angle.sin()) as f32,
        ];
        cloud.push(
            p.position,
            dc_for_color(p.color),
            &rest,
            rng.random_range(-2.0f32..4.0),
            [s, s + rng.random_range(-0.3..0.3), s + rng.random_range(-0.3..0.3)],
            rot,
        );
        labels.push(Label {
            category: p.category,
            mask_visible: on_any_mask(p.position, &projectors, &bin_masks),
        });
    }

    let entries = masked_idx
        .iter()
        .zip(bin_masks)
        .zip(&images)
        .map(|((&i, m), img)| MaskedView::new(rig[i].clone(), m, Some(RgbImage::from_rgb8(img))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SyntheticScene {
        spec: spec.clone(),
        cloud,
        labels,
        rig,
        masks: MaskSet::new(entries)?,
        masked_images: images,
    })
}

impl SyntheticScene {
    pub fn count(&self, category: Category) -> usize {
        self.labels.iter().filter(|l| l.category == category).count()
    }

    /// Writes `scene.ply`, `cameras/` (COLMAP text), `cameras.json`,
    /// `masks/`, `images/`, `labels.bin` and `scene.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(dir)?;
        ply::save_ply(&self.cloud, dir.join("scene.ply"))?;
        colmap::write_colmap_text(dir.join("cameras"), &self.rig)?;
        rig_json::save_cameras_json(&self.rig, dir.join("cameras.json"))?;
        let (mask_dir, image_dir) = (dir.join("masks"), dir.join("images"));
        mkdir(&mask_dir)?;
        mkdir(&image_dir)?;
        for (entry, img) in self.masks.entries.iter().zip(&self.masked_images) {
            let name = &entry.view.image_name;
            let mask_path = mask_dir.join(name);
            entry.mask.to_gray().save(&mask_path).map_err(|source| Error::Image {
                path: mask_path.display().to_string(),
                source,
            })?;
            let image_path = image_dir.join(name);
            img.save(&image_path).map_err(|source| Error::Image {
                path: image_path.display().to_string(),
                source,
            })?;
        }
        write_labels(&self.labels, &dir.join("labels.bin"))?;
        let meta = dir.join("scene.json");
        fs::write(&meta, serde_json::to_string_pretty(&self.spec)? + "\n").map_err(|e| Error::io(&meta, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::whitelist::{accumulate_hits, whitelist};

    fn small(seed: u64) -> SceneSpec {
        SceneSpec {
            seed,
            n_object: 400,
            n_background: 600,
            n_floaters: 100,
            width: 128,
            height: 96,
            focal: 128.0,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn label_bytes_round_trip() {
        for category in [Category::Object, Category::Background, Category::Floater] {
            for mask_visible in [false, true] {
                let l = Label { category, mask_visible };
                assert_eq!(Label::from_byte(l.to_byte()), Some(l));
            }
        }
        assert_eq!(Label::from_byte(3), None);
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_scene(&small(3)).unwrap();
        let b = generate_scene(&small(3)).unwrap();
        let mut pa = Vec::new();
        let mut pb = Vec::new();
        ply::write_ply(&a.cloud, &mut pa).unwrap();
        ply::write_ply(&b.cloud, &mut pb).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.masked_images, b.masked_images);
        let c = generate_scene(&small(4)).unwrap();
        assert_ne!(a.cloud.positions, c.cloud.positions);
    }

    #[test]
    fn counts_and_construction_invariants() {
        let scene = generate_scene(&small(1)).unwrap();
        assert_eq!(scene.cloud.len(), 1100);
        assert_eq!(scene.count(Category::Object), 400);
        assert_eq!(scene.count(Category::Background), 600);
        assert_eq!(scene.count(Category::Floater), 100);
        assert_eq!(scene.rig.len(), 12);
        assert_eq!(scene.masks.total_views(), 3);
        assert_eq!(scene.spec.masked_indices(), vec![0, 4, 8]);

        // every object Gaussian lands on its own disk; no background on any mask
        let hits = accumulate_hits(&scene.cloud, &scene.masks);
        for (l, &h) in scene.labels.iter().zip(&hits) {
            assert_eq!(l.mask_visible, h >= 1);
            match l.category {
                Category::Object => assert!(h >= 1),
                Category::Background => assert_eq!(h, 0),
                Category::Floater => {}
            }
        }
        let keep = whitelist(&hits, 1);
        assert!(scene
            .labels
            .iter()
            .zip(&keep)
            .all(|(l, &k)| !(k && l.category == Category::Background)));
    }

    #[test]
    fn object_colors_survive_quantization() {
        let c = [0.8, 0.55, 0.3];
        let q = quantize(c);
        let back = [q[0] as f64 / 255.0, q[1] as f64 / 255.0, q[2] as f64 / 255.0];
        let dc = crate::color::dc_color(dc_for_color(c));
        assert!(crate::color::color_delta(dc, back) < 0.01);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            SceneSpec { mask_views: 13, ..SceneSpec::default() },
            SceneSpec { mask_views: 0, ..SceneSpec::default() },
            SceneSpec { ring_radius: 0.5, ..SceneSpec::default() },
            SceneSpec { width: 0, ..SceneSpec::default() },
        ];
        for s in bad {
            assert!(matches!(generate_scene(&s), Err(Error::InvalidScene(_))), "{s:?}");
        }
    }

    #[test]
    fn empty_clutter_is_allowed() {
        let spec = SceneSpec {
            n_background: 0,
            n_floaters: 0,
            ..small(2)
        };
        let scene = generate_scene(&spec).unwrap();
        assert!(scene.labels.iter().all(|l| l.category == Category::Object && l.mask_visible));
    }
}
