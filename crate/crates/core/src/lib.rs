//! Mask-guided pruning of 3D Gaussian Splatting models.
//!
//! Given a trained model, the camera rig and a handful of binary object
//! masks, the pipeline removes background and floater Gaussians in three
//! stages:
//!
//! 1. [`whitelist`]: keep Gaussians whose center projects onto an object
//!    pixel in at least `m` masked views.
//! 2. [`color`]: among Gaussians that are front-most on some object pixel,
//!    keep those whose DC color matches the masked image there.
//! 3. [`outlier`]: drop the tail of the centroid-distance or mean k-NN
//!    distance distribution.
//!
//! [`pipeline::run_pipeline`] wires the stages to file I/O and writes a
//! [`report::PruneReport`]. [`synth`] and [`score`] provide labeled scenes for
//! evaluation.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod cloud;
pub mod colmap;
pub mod color;
pub mod error;
pub mod knn;
pub mod mask;
pub mod outlier;
pub mod params;
pub mod pipeline;
pub mod ply;
pub mod projection;
pub mod report;
pub mod rig_json;
pub mod score;
pub mod synth;
pub mod whitelist;

pub use camera::{CameraError, CameraView};
pub use cloud::{GaussianCloud, LengthMismatch, SH_REST_DEGREE3};
pub use color::{dc_color, ColorEvidence, SH_C0};
pub use error::{Error, Result};
pub use knn::{Neighbor, NeighborIndex};
pub use mask::{BinaryMask, MaskError, MaskSet, MaskedView, RgbImage};
pub use outlier::{OutlierConfig, OutlierError};
pub use params::{PruneParams, Variant};
pub use pipeline::{prune, run_pipeline, CameraSource, PipelineConfig, PruneOutcome};
pub use ply::{load_ply, save_ply, PlyError, PlyLayout};
pub use projection::{project_point, ProjectedPoint, Projector};
pub use report::PruneReport;
pub use score::{score, Metrics};
pub use synth::{generate_scene, Category, Label, SceneSpec, SyntheticScene};
pub use whitelist::{SelectionState, StageRecord};
