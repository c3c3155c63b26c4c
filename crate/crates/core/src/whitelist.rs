//! Stage 1: keep Gaussians that land on object pixels in at least `m` masked views.

use rayon::prelude::*;
use serde::Serialize;

use crate::cloud::GaussianCloud;
use crate::mask::{MaskSet, MaskedView};
use crate::projection::Projector;

/// One completed stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub input: usize,
    pub removed: usize,
    pub remaining: usize,
}

/// The keep-vector shared by all stages, plus per-Gaussian mask hit counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub keep: Vec<bool>,
    pub hit_counts: Vec<u32>,
    pub stage_log: Vec<StageRecord>,
}

impl SelectionState {
    pub fn new(n: usize) -> Self {
        Self {
            keep: vec![true; n],
            hit_counts: vec![0; n],
            stage_log: Vec::new(),
        }
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        self.keep
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i))
            .collect()
    }

    /// Intersects the current keep-vector with `keep` and logs the stage.
    ///
    /// Gaussians already removed stay removed, so remaining counts never grow.
    pub fn apply(&mut self, name: &str, keep: &[bool]) -> &StageRecord {
        assert_eq!(keep.len(), self.keep.len(), "stage keep-vector length");
        let input = self.kept();
        for (k, &new) in self.keep.iter_mut().zip(keep) {
            *k &= new;
        }
        let remaining = self.kept();
        self.stage_log.push(StageRecord {
            name: name.to_string(),
            input,
            removed: input - remaining,
            remaining,
        });
        self.stage_log.last().unwrap()
    }

    /// Clears the kept Gaussians at `indices` and logs the stage.
    pub fn remove(&mut self, name: &str, indices: impl IntoIterator<Item = usize>) -> &StageRecord {
        let mut keep = vec![true; self.keep.len()];
        for i in indices {
            keep[i] = false;
        }
        self.apply(name, &keep)
    }
}

fn view_hits(cloud: &GaussianCloud, entry: &MaskedView) -> Vec<bool> {
    let proj = Projector::new(&entry.view);
    cloud
        .positions
        .iter()
        .map(|&p| match proj.pixel(p) {
            Some((x, y, _)) => entry.mask.get(x, y),
            None => false,
        })
        .collect()
}

/// Number of masked views in which each Gaussian projects onto an object pixel.
///
/// Views are processed in parallel and merged by element-wise sum, so the
/// result does not depend on scheduling.
pub fn accumulate_hits(cloud: &GaussianCloud, masks: &MaskSet) -> Vec<u32> {
    let n = cloud.len();
    masks
        .entries
        .par_iter()
        .map(|e| view_hits(cloud, e))
        .fold(
            || vec![0u32; n],
            |mut acc, hits| {
                for (a, h) in acc.iter_mut().zip(hits) {
                    *a += h as u32;
                }
                acc
            },
        )
        .reduce(
            || vec![0u32; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// `keep[i] = hit_counts[i] >= m`.
pub fn whitelist(hit_counts: &[u32], m: u32) -> Vec<bool> {
    assert!(m >= 1, "minimum view count must be at least 1");
    hit_counts.iter().map(|&h| h >= m).collect()
}
