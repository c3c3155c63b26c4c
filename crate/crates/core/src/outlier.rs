//! Stage 3: percentile-based geometric outlier rules over the kept Gaussians.
//!
//! All rules remove values strictly above the percentile threshold, so a
//! value equal to the threshold is never removed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knn::NeighborIndex;

#[derive(Debug, Error, PartialEq)]
pub enum OutlierError {
    #[error("percentile of an empty input")]
    EmptyInput,
    #[error("percentile {0} outside [0, 100]")]
    InvalidPercentile(f64),
    #[error("spatial outlier removal needs at least 2 points, got {0}")]
    DegenerateSelection(usize),
    #[error("neighbor outlier removal needs more than k={k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("neighbor count k must be positive")]
    ZeroNeighbors,
}

/// Linear-interpolation percentile: rank `p / 100 * (n - 1)` on the sorted values.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, OutlierError> {
    if values.is_empty() {
        return Err(OutlierError::EmptyInput);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(OutlierError::InvalidPercentile(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

fn above_percentile(values: &[f64], p: f64) -> Result<Vec<bool>, OutlierError> {
    let threshold = percentile(values, p)?;
    Ok(values.iter().map(|&v| v > threshold).collect())
}

/// Distance of each point from the centroid.
pub fn centroid_distances(positions: &[[f32; 3]]) -> Vec<f64> {
    let n = positions.len() as f64;
    let mut c = [0.0f64; 3];
    for p in positions {
        for a in 0..3 {
            c[a] += p[a] as f64;
        }
    }
    let c = c.map(|s| s / n);
    positions
        .iter()
        .map(|p| {
            let d = [p[0] as f64 - c[0], p[1] as f64 - c[1], p[2] as f64 - c[2]];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        })
        .collect()
}

/// Removes points farther from the centroid than the `p_spatial` percentile.
pub fn spatial_outliers(positions: &[[f32; 3]], p_spatial: f64) -> Result<Vec<bool>, OutlierError> {
    if positions.len() < 2 {
        return Err(OutlierError::DegenerateSelection(positions.len()));
    }
    above_percentile(&centroid_distances(positions), p_spatial)
}

/// Mean distance from each point to its `k` nearest neighbors (self excluded).
pub fn mean_neighbor_distances(positions: &[[f32; 3]], k: usize) -> Vec<f64> {
    let index = NeighborIndex::from_f32(positions);
    (0..positions.len())
        .into_par_iter()
        .map(|i| {
            let nn = index.query(i, k);
            nn.iter().map(|n| n.distance).sum::<f64>() / k as f64
        })
        .collect()
}

/// Removes points whose mean k-NN distance exceeds the `p_neighbor` percentile.
pub fn neighbor_outliers(positions: &[[f32; 3]], k: usize, p_neighbor: f64) -> Result<Vec<bool>, OutlierError> {
    if k == 0 {
        return Err(OutlierError::ZeroNeighbors);
    }
    if positions.len() <= k {
        return Err(OutlierError::TooFewPoints { n: positions.len(), k });
    }
    if !(0.0..=100.0).contains(&p_neighbor) {
        return Err(OutlierError::InvalidPercentile(p_neighbor));
    }
    above_percentile(&mean_neighbor_distances(positions, k), p_neighbor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    pub k: usize,
    pub p_spatial: f64,
    pub p_neighbor: f64,
}

/// Union of spatial and neighbor removals, both computed on the same input.
pub fn combined_outliers(positions: &[[f32; 3]], config: &OutlierConfig) -> Result<Vec<bool>, OutlierError> {
    let spatial = spatial_outliers(positions, config.p_spatial)?;
    let neighbor = neighbor_outliers(positions, config.k, config.p_neighbor)?;
    Ok(spatial.iter().zip(&neighbor).map(|(&a, &b)| a || b).collect())
}
