//! Sparse binary object masks paired with cameras by file stem.
//!
//! Masks are binarized at `> 127` and resized to the camera resolution with
//! nearest-neighbor sampling. Masked RGB images are resized bilinearly and
//! scaled to `[0, 1]`. Cameras without a mask are simply absent.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{GrayImage, RgbImage as Rgb8Image};
use thiserror::Error;

use crate::camera::CameraView;

/// Binarization threshold; a pixel is object iff its value is strictly greater.
pub const MASK_THRESHOLD: u8 = 127;

const MASK_EXTENSIONS: &[&str] = &["png", "pgm"];
const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("no mask files (.png/.pgm) found in {0}")]
    NoMasksFound(PathBuf),
    #[error("mask {0} does not match any camera image name")]
    UnpairedMask(PathBuf),
    #[error("more than one mask for camera '{0}'")]
    DuplicateMask(String),
    #[error("mask stem '{0}' matches more than one camera")]
    AmbiguousCamera(String),
    #[error("mask for '{0}' has no object pixels")]
    AllBlackMask(String),
    #[error("no masked image for '{0}' in the image directory")]
    MissingImage(String),
    #[error("'{name}': {what} is {got_w}x{got_h}, camera is {want_w}x{want_h}")]
    DimensionMismatch {
        name: String,
        what: &'static str,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major H×W boolean grid; `true` marks object pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, fill: bool) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    /// Row-major pixel flags.
    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Nearest-neighbor resample; identity when the size already matches.
    pub fn resize_nearest(&self, width: u32, height: u32) -> BinaryMask {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let xs: Vec<u32> = (0..width).map(|x| nearest_source(x, width, self.width)).collect();
        let ys: Vec<u32> = (0..height).map(|y| nearest_source(y, height, self.height)).collect();
        BinaryMask::from_fn(width, height, |x, y| self.get(xs[x as usize], ys[y as usize]))
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([if self.get(x, y) { 255 } else { 0 }])
        })
    }
}

/// Source index whose pixel center is nearest to the destination pixel center.
fn nearest_source(dst: u32, dst_len: u32, src_len: u32) -> u32 {
    let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64).floor() as u32;
    s.min(src_len - 1)
}

/// `true` exactly where `pixel > threshold`.
pub fn binarize(gray: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: gray.width(),
        height: gray.height(),
        data: gray.pixels().map(|p| p.0[0] > threshold).collect(),
    }
}

/// Row-major H×W RGB image with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    data: Vec<[f32; 3]>,
}

impl RgbImage {
    pub fn from_rgb8(img: &Rgb8Image) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img
                .pixels()
                .map(|p| p.0.map(|c| c as f32 / 255.0))
                .collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [f32; 3] {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// A camera with its object mask and, optionally, the masked color image.
#[derive(Debug, Clone)]
pub struct MaskedView {
    pub view: CameraView,
    pub mask: BinaryMask,
    pub masked_image: Option<RgbImage>,
}

impl MaskedView {
    pub fn new(view: CameraView, mask: BinaryMask, masked_image: Option<RgbImage>) -> Result<Self, MaskError> {
        let name = view.image_name.clone();
        let check = |what: &'static str, w: u32, h: u32| {
            if (w, h) == (view.width, view.height) {
                Ok(())
            } else {
                Err(MaskError::DimensionMismatch {
                    name: name.clone(),
                    what,
                    got_w: w,
                    got_h: h,
                    want_w: view.width,
                    want_h: view.height,
                })
            }
        };
        check("mask", mask.width, mask.height)?;
        if let Some(img) = &masked_image {
            check("masked image", img.width, img.height)?;
        }
        if mask.count_true() == 0 {
            return Err(MaskError::AllBlackMask(name));
        }
        Ok(Self {
            view,
            mask,
            masked_image,
        })
    }
}

/// The masked views used for supervision, one per camera at most.
#[derive(Debug, Clone, Default)]
pub struct MaskSet {
    pub entries: Vec<MaskedView>,
}

impl MaskSet {
    pub fn new(entries: Vec<MaskedView>) -> Result<Self, MaskError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if !seen.insert(e.view.image_name.as_str()) {
                return Err(MaskError::DuplicateMask(e.view.image_name.clone()));
            }
        }
        Ok(Self { entries })
    }

    /// Number of masked views (M).
    pub fn total_views(&self) -> usize {
        self.entries.len()
    }

    pub fn with_images(&self) -> usize {
        self.entries.iter().filter(|e| e.masked_image.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn stem(name: &str) -> &str {
    let file = name.rsplit(['/', '\\']).next().unwrap_or(name);
    match file.rfind('.') {
        Some(i) if i > 0 => &file[..i],
        _ => file,
    }
}

fn has_extension(path: &Path, allowed: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| allowed.iter().any(|a| a.eq_ignore_ascii_case(e)))
        .unwrap_or(false)
}

fn sorted_files(dir: &Path, allowed: &[&str]) -> Result<Vec<PathBuf>, MaskError> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && has_extension(&path, allowed) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn open_image(path: &Path) -> Result<image::DynamicImage, MaskError> {
    image::open(path).map_err(|source| MaskError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads every mask in `mask_dir`, pairing each with the camera whose image
/// name has the same stem. When `image_dir` is given, a masked image with the
/// same stem must exist for each mask.
pub fn load_masks(
    mask_dir: impl AsRef<Path>,
    image_dir: Option<&Path>,
    rig: &[CameraView],
) -> Result<MaskSet, MaskError> {
    let mask_dir = mask_dir.as_ref();
    let files = sorted_files(mask_dir, MASK_EXTENSIONS)?;
    if files.is_empty() {
        return Err(MaskError::NoMasksFound(mask_dir.to_path_buf()));
    }

    let mut by_stem: HashMap<&str, Option<&CameraView>> = HashMap::new();
    for v in rig {
        by_stem
            .entry(stem(&v.image_name))
            .and_modify(|slot| *slot = None)
            .or_insert(Some(v));
    }

    let images: HashMap<String, PathBuf> = match image_dir {
        Some(dir) => sorted_files(dir, IMAGE_EXTENSIONS)?
            .into_iter()
            .map(|p| (stem(&p.file_name().unwrap().to_string_lossy()).to_string(), p))
            .collect(),
        None => HashMap::new(),
    };

    let mut entries = Vec::with_capacity(files.len());
    for path in files {
        let file_name = path.file_name().unwrap().to_string_lossy().into_owned();
        let key = stem(&file_name);
        let view = match by_stem.get(key) {
            None => return Err(MaskError::UnpairedMask(path)),
            Some(None) => return Err(MaskError::AmbiguousCamera(key.to_string())),
            Some(Some(v)) => (*v).clone(),
        };

        let gray = open_image(&path)?.to_luma8();
        let mask = binarize(&gray, MASK_THRESHOLD).resize_nearest(view.width, view.height);

        let masked_image = match image_dir {
            None => None,
            Some(_) => {
                let img_path = images
                    .get(key)
                    .ok_or_else(|| MaskError::MissingImage(view.image_name.clone()))?;
                let mut rgb = open_image(img_path)?.to_rgb8();
                if rgb.dimensions() != (view.width, view.height) {
                    rgb = imageops::resize(&rgb, view.width, view.height, FilterType::Triangle);
                }
                Some(RgbImage::from_rgb8(&rgb))
            }
        };
        entries.push(MaskedView::new(view, mask, masked_image)?);
    }
    entries.sort_by_key(|e| e.view.view_id);
    MaskSet::new(entries)
}
