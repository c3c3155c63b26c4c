//! Stage orchestration: whitelist → color validation → outlier removal.
//!
//! [`prune`] runs on in-memory data using the current rayon pool.
//! [`run_pipeline`] adds file loading, a dedicated worker pool, output
//! writing and the JSON report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::camera::CameraView;
use crate::cloud::GaussianCloud;
use crate::color::{validate_colors, ColorEvidence};
use crate::error::{Error, Result};
use crate::mask::{load_masks, MaskSet};
use crate::outlier::{combined_outliers, neighbor_outliers, spatial_outliers, OutlierError};
use crate::params::{PruneParams, Variant};
use crate::camera::CameraError;
use crate::mask::MaskError;
use crate::ply::{load_ply_with_layout, save_ply, PlyError};
use crate::report::{PruneReport, ReportContext};
use crate::whitelist::{accumulate_hits, whitelist, SelectionState};
use crate::{colmap, rig_json};

pub const STAGE_WHITELIST: &str = "whitelist";
pub const STAGE_COLOR: &str = "color_validation";
pub const STAGE_NEIGHBOR: &str = "neighbor_outliers";
pub const STAGE_SPATIAL: &str = "spatial_outliers";
pub const STAGE_COMBINED: &str = "combined_outliers";

/// Header comment marking a model written by this pipeline.
pub const PRUNED_MARKER: &str = "maskprune";

/// Result of [`prune`].
#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub selection: SelectionState,
    pub evidence: ColorEvidence,
    /// Milliseconds per logged stage, in stage order.
    pub stage_millis: Vec<f64>,
    pub warnings: Vec<String>,
}

impl PruneOutcome {
    pub fn whitelisted(&self) -> usize {
        self.selection.stage_log[0].remaining
    }
}

fn guard(params: &PruneParams, stage: &'static str, state: &SelectionState) -> Result<()> {
    let rec = state.stage_log.last().expect("stage just logged");
    if rec.input > 0 && rec.removed as f64 > params.max_stage_removal * rec.input as f64 {
        return Err(Error::StageGuard {
            stage,
            removed: rec.removed,
            input: rec.input,
            limit: params.max_stage_removal * 100.0,
        });
    }
    Ok(())
}

fn outlier_stage(variant: Variant) -> Option<&'static str> {
    match variant {
        Variant::Basic => None,
        Variant::Neighbor | Variant::Multiview => Some(STAGE_NEIGHBOR),
        Variant::Spatial => Some(STAGE_SPATIAL),
        Variant::Combined => Some(STAGE_COMBINED),
    }
}

/// Runs all stages of `params.variant` on one selection state.
pub fn prune(cloud: &GaussianCloud, masks: &MaskSet, params: &PruneParams) -> Result<PruneOutcome> {
    params.validate().map_err(Error::InvalidParams)?;
    if masks.is_empty() {
        return Err(Error::NoMaskedViews);
    }
    let mut state = SelectionState::new(cloud.len());
    let mut stage_millis = Vec::new();
    let mut warnings = Vec::new();

    let t = Instant::now();
    state.hit_counts = accumulate_hits(cloud, masks);
    let keep = whitelist(&state.hit_counts, params.effective_min_views());
    state.apply(STAGE_WHITELIST, &keep);
    stage_millis.push(t.elapsed().as_secs_f64() * 1e3);
    guard(params, STAGE_WHITELIST, &state)?;

    let t = Instant::now();
    if masks.with_images() == 0 {
        warnings.push("no masked images available: color validation found no evidence".into());
    }
    let color = validate_colors(cloud, &state.keep, masks, params.tau);
    state.apply(STAGE_COLOR, &color.keep);
    stage_millis.push(t.elapsed().as_secs_f64() * 1e3);
    guard(params, STAGE_COLOR, &state)?;

    if let Some(stage) = outlier_stage(params.variant) {
        let t = Instant::now();
        let kept = state.kept_indices();
        let positions: Vec<[f32; 3]> = kept.iter().map(|&i| cloud.positions[i]).collect();
        let removal = match params.variant {
            Variant::Spatial => spatial_outliers(&positions, params.p_spatial),
            Variant::Combined => combined_outliers(&positions, &params.outlier_config()),
            _ => neighbor_outliers(&positions, params.k, params.p_neighbor),
        };
        let removal = match removal {
            Ok(r) => r,
            Err(e @ (OutlierError::TooFewPoints { .. } | OutlierError::DegenerateSelection(_))) => {
                warnings.push(format!("{stage} skipped: {e}"));
                vec![false; kept.len()]
            }
            Err(source) => return Err(Error::Outlier { stage, source }),
        };
        state.remove(
            stage,
            kept.iter().zip(&removal).filter(|(_, &r)| r).map(|(&i, _)| i),
        );
        stage_millis.push(t.elapsed().as_secs_f64() * 1e3);
        guard(params, stage, &state)?;
    }

    if state.kept() == 0 {
        warnings.push("all gaussians were removed".into());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(PruneOutcome {
        selection: state,
        evidence: color.evidence,
        stage_millis,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CameraSource {
    ColmapText(PathBuf),
    Json(PathBuf),
}

impl CameraSource {
    pub fn load(&self) -> Result<Vec<CameraView>> {
        let views = match self {
            CameraSource::ColmapText(dir) => colmap::load_colmap_text(dir),
            CameraSource::Json(path) => rig_json::load_cameras_json(path),
        };
        views.map_err(|e| match e {
            CameraError::Io(source) => Error::io(self.path(), source),
            e => e.into(),
        })
    }

    pub fn path(&self) -> &Path {
        match self {
            CameraSource::ColmapText(p) | CameraSource::Json(p) => p,
        }
    }
}

/// Everything needed for one file-to-file pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub params: PruneParams,
    pub model: PathBuf,
    pub cameras: CameraSource,
    pub masks: PathBuf,
    pub images: Option<PathBuf>,
    pub output: PathBuf,
    pub report: Option<PathBuf>,
    /// `None` uses one worker per available core.
    pub workers: Option<usize>,
}

/// Loads inputs, prunes, writes the pruned PLY and (optionally) the JSON report.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PruneReport> {
    config.params.validate().map_err(Error::InvalidParams)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()?;
    let workers = pool.current_num_threads();

    let started = Instant::now();
    let (cloud, layout) = load_ply_with_layout(&config.model).map_err(|e| match e {
        PlyError::Io(source) => Error::io(&config.model, source),
        e => e.into(),
    })?;
    let rig = config.cameras.load()?;
    let masks = load_masks(&config.masks, config.images.as_deref(), &rig).map_err(|e| match e {
        MaskError::Io(source) => Error::io(&config.masks, source),
        e => e.into(),
    })?;
    let load_millis = started.elapsed().as_secs_f64() * 1e3;

    let previously_pruned = cloud.comments.iter().any(|c| c.starts_with(PRUNED_MARKER));
    if previously_pruned {
        log::warn!("input was already pruned; percentile outlier rules will remove a further tail");
    }
    if !layout.is_reference() {
        log::warn!(
            "model layout differs from the reference 3DGS layout: {} bytes/vertex, {} SH rest coefficients",
            layout.stride_bytes,
            layout.sh_rest_count
        );
    }

    let outcome = pool.install(|| prune(&cloud, &masks, &config.params))?;

    let t = Instant::now();
    let mut pruned = cloud.subset(&outcome.selection.keep)?;
    pruned.comments.retain(|c| !c.starts_with(PRUNED_MARKER));
    pruned.comments.push(format!(
        "{PRUNED_MARKER} variant={} kept={} of={}",
        config.params.variant,
        pruned.len(),
        cloud.len()
    ));
    let output_bytes = save_ply(&pruned, &config.output).map_err(|e| match e {
        PlyError::Io(source) => Error::io(&config.output, source),
        e => e.into(),
    })?;
    let write_millis = t.elapsed().as_secs_f64() * 1e3;

    let report = PruneReport::build(ReportContext {
        config,
        outcome: &outcome,
        layout: &layout,
        input_bytes: std::fs::metadata(&config.model)
            .map_err(|e| Error::io(&config.model, e))?
            .len(),
        output_bytes,
        rig_views: rig.len(),
        masks: &masks,
        workers,
        load_millis,
        write_millis,
        total_millis: started.elapsed().as_secs_f64() * 1e3,
        previously_pruned,
    });
    if let Some(path) = &config.report {
        report.save(path)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::SH_REST_DEGREE3;
    use crate::mask::{BinaryMask, MaskedView, RgbImage};
    use nalgebra::{Matrix3, Vector3};

    fn view(id: u32) -> CameraView {
        CameraView {
            view_id: id,
            image_name: format!("v{id}"),
            fx: 20.0,
            fy: 20.0,
            cx: 16.0,
            cy: 16.0,
            width: 32,
            height: 32,
            r_c2w: Matrix3::identity(),
            t_c2w: Vector3::zeros(),
        }
    }

    fn grid_cloud() -> GaussianCloud {
        let mut c = GaussianCloud::with_capacity(0, SH_REST_DEGREE3);
        for x in 0..8 {
            for y in 0..8 {
                let p = [x as f32 * 0.05 - 0.2, y as f32 * 0.05 - 0.2, 2.0];
                c.push(p, [0.0; 3], &[0.0; SH_REST_DEGREE3], 0.0, [0.0; 3], [1.0, 0.0, 0.0, 0.0]);
            }
        }
        // behind the camera
        c.push([0.0, 0.0, -2.0], [0.0; 3], &[0.0; SH_REST_DEGREE3], 0.0, [0.0; 3], [1.0, 0.0, 0.0, 0.0]);
        c
    }

    fn masks() -> MaskSet {
        let gray = RgbImage::from_rgb8(&image::RgbImage::from_pixel(32, 32, image::Rgb([128, 128, 128])));
        MaskSet::new(vec![MaskedView::new(view(0), BinaryMask::new(32, 32, true), Some(gray)).unwrap()]).unwrap()
    }

    #[test]
    fn basic_logs_two_stages() {
        let out = prune(&grid_cloud(), &masks(), &PruneParams::for_variant(Variant::Basic)).unwrap();
        let names: Vec<&str> = out.selection.stage_log.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec![STAGE_WHITELIST, STAGE_COLOR]);
        assert_eq!(out.selection.kept(), 64);
        assert_eq!(out.stage_millis.len(), 2);
    }

    #[test]
    fn outlier_stage_names() {
        for (variant, name) in [
            (Variant::Neighbor, STAGE_NEIGHBOR),
            (Variant::Spatial, STAGE_SPATIAL),
            (Variant::Combined, STAGE_COMBINED),
        ] {
            let mut params = PruneParams::for_variant(variant);
            params.min_views = 1;
            let out = prune(&grid_cloud(), &masks(), &params).unwrap();
            assert_eq!(out.selection.stage_log.len(), 3);
            assert_eq!(out.selection.stage_log[2].name, name);
        }
    }

    #[test]
    fn multiview_with_one_mask_trips_the_guard() {
        let err = prune(&grid_cloud(), &masks(), &PruneParams::for_variant(Variant::Multiview)).unwrap_err();
        assert!(matches!(err, Error::StageGuard { stage: STAGE_WHITELIST, removed: 65, input: 65, .. }));

        let mut params = PruneParams::for_variant(Variant::Multiview);
        params.max_stage_removal = 1.0;
        let out = prune(&grid_cloud(), &masks(), &params).unwrap();
        assert_eq!(out.selection.kept(), 0);
        assert!(out.warnings.iter().any(|w| w.contains("skipped")));
        assert!(out.warnings.iter().any(|w| w.contains("all gaussians")));
    }

    #[test]
    fn needs_masks() {
        let err = prune(&grid_cloud(), &MaskSet::default(), &PruneParams::default()).unwrap_err();
        assert!(matches!(err, Error::NoMaskedViews));
    }
}
