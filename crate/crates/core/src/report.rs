//! JSON pruning report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskSet;
use crate::params::PruneParams;
use crate::pipeline::{PipelineConfig, PruneOutcome};
use crate::ply::PlyLayout;

pub const SCHEMA_VERSION: u32 = 1;
/// Stage 2 keeps a Gaussian if any front-layer object pixel matches.
pub const COLOR_EVIDENCE_RULE: &str = "per_pixel_any_match";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub gaussians: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputStats {
    pub gaussians: usize,
    pub bytes: u64,
    pub sh_rest_count: usize,
    pub stride_bytes: usize,
    pub reference_layout: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub input: usize,
    pub removed: usize,
    pub remaining: usize,
    pub millis: f64,
    /// `removed / input` of this stage.
    pub fraction_of_input: f64,
    /// `removed / N` for the original model.
    pub fraction_of_original: f64,
    /// `removed / whitelisted`; absent for the whitelist stage itself.
    pub fraction_of_whitelisted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub model: String,
    pub cameras: String,
    pub masks: String,
    pub images: Option<String>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub params: PruneParams,
    pub effective_min_views: u32,
    pub color_evidence_rule: String,
    pub workers: usize,
    pub paths: Paths,
    pub input: InputStats,
    pub output: ModelStats,
    /// `1 - N'/N`.
    pub compression_ratio: f64,
    /// Output bytes over input bytes.
    pub size_ratio: f64,
    pub masked_views: usize,
    pub rig_views: usize,
    pub views_with_images: usize,
    pub stages: Vec<StageReport>,
    pub load_millis: f64,
    pub write_millis: f64,
    pub total_millis: f64,
    pub input_previously_pruned: bool,
    pub warnings: Vec<String>,
    /// Input indices of the Gaussians written to the output, ascending.
    pub kept_indices: Vec<usize>,
}

pub(crate) struct ReportContext<'a> {
    pub config: &'a PipelineConfig,
    pub outcome: &'a PruneOutcome,
    pub layout: &'a PlyLayout,
    pub input_bytes: u64,
    pub output_bytes: u64,
    pub rig_views: usize,
    pub masks: &'a MaskSet,
    pub workers: usize,
    pub load_millis: f64,
    pub write_millis: f64,
    pub total_millis: f64,
    pub previously_pruned: bool,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl PruneReport {
    pub(crate) fn build(ctx: ReportContext<'_>) -> Self {
        let n = ctx.layout.vertex_count;
        let sel = &ctx.outcome.selection;
        let whitelisted = ctx.outcome.whitelisted();
        let stages = sel
            .stage_log
            .iter()
            .zip(&ctx.outcome.stage_millis)
            .enumerate()
            .map(|(i, (s, &millis))| StageReport {
                name: s.name.clone(),
                input: s.input,
                removed: s.removed,
                remaining: s.remaining,
                millis,
                fraction_of_input: ratio(s.removed, s.input),
                fraction_of_original: ratio(s.removed, n),
                fraction_of_whitelisted: (i > 0).then(|| ratio(s.removed, whitelisted)),
            })
            .collect();
        let kept_indices = sel.kept_indices();
        let mut warnings = ctx.outcome.warnings.clone();
        if ctx.previously_pruned {
            warnings.push("input was written by a previous pruning run; outlier stages are not idempotent".into());
        }
        let c = ctx.config;
        PruneReport {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            params: c.params,
            effective_min_views: c.params.effective_min_views(),
            color_evidence_rule: COLOR_EVIDENCE_RULE.to_string(),
            workers: ctx.workers,
            paths: Paths {
                model: c.model.display().to_string(),
                cameras: c.cameras.path().display().to_string(),
                masks: c.masks.display().to_string(),
                images: c.images.as_ref().map(|p| p.display().to_string()),
                output: c.output.display().to_string(),
            },
            input: InputStats {
                gaussians: n,
                bytes: ctx.input_bytes,
                sh_rest_count: ctx.layout.sh_rest_count,
                stride_bytes: ctx.layout.stride_bytes,
                reference_layout: ctx.layout.is_reference(),
            },
            output: ModelStats {
                gaussians: kept_indices.len(),
                bytes: ctx.output_bytes,
            },
            compression_ratio: if n == 0 { 0.0 } else { 1.0 - ratio(kept_indices.len(), n) },
            size_ratio: if ctx.input_bytes == 0 {
                1.0
            } else {
                ctx.output_bytes as f64 / ctx.input_bytes as f64
            },
            masked_views: ctx.masks.total_views(),
            rig_views: ctx.rig_views,
            views_with_images: ctx.masks.with_images(),
            stages,
            load_millis: ctx.load_millis,
            write_millis: ctx.write_millis,
            total_millis: ctx.total_millis,
            input_previously_pruned: ctx.previously_pruned,
            warnings,
            kept_indices,
        }
    }

    /// Gaussians per millisecond over the whitelist and color stages.
    pub fn stage12_throughput(&self) -> f64 {
        let ms: f64 = self.stages.iter().take(2).map(|s| s.millis).sum();
        if ms > 0.0 {
            self.input.gaussians as f64 / ms
        } else {
            f64::INFINITY
        }
    }

    /// Stage counts with timings and paths stripped, for run-to-run comparison.
    pub fn counts(&self) -> Vec<(String, usize, usize, usize)> {
        self.stages
            .iter()
            .map(|s| (s.name.clone(), s.input, s.removed, s.remaining))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
