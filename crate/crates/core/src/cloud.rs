//! Columnar storage for a trained Gaussian splatting model.

use thiserror::Error;

/// Number of higher-order SH coefficients for a degree-3 model (15 per channel).
pub const SH_REST_DEGREE3: usize = 45;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("keep vector has length {got}, cloud has {expected} gaussians")]
pub struct LengthMismatch {
    pub expected: usize,
    pub got: usize,
}

/// Structure-of-arrays store of N Gaussians.
///
/// Positions are kept contiguous since every masked view scans them. Opacity,
/// scale and rotation are carried through untouched for output fidelity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianCloud {
    pub positions: Vec<[f32; 3]>,
    pub f_dc: Vec<[f32; 3]>,
    /// Row-major `count × sh_rest_count` block of view-dependent SH terms.
    pub f_rest: Vec<f32>,
    pub sh_rest_count: usize,
    pub opacity: Vec<f32>,
    pub scales: Vec<[f32; 3]>,
    pub rotations: Vec<[f32; 4]>,
    /// Free-form PLY header comments, preserved across load/save.
    pub comments: Vec<String>,
}

impl GaussianCloud {
    /// An empty cloud with the given number of rest coefficients per Gaussian.
    pub fn with_capacity(n: usize, sh_rest_count: usize) -> Self {
        Self {
            positions: Vec::with_capacity(n),
            f_dc: Vec::with_capacity(n),
            f_rest: Vec::with_capacity(n * sh_rest_count),
            sh_rest_count,
            opacity: Vec::with_capacity(n),
            scales: Vec::with_capacity(n),
            rotations: Vec::with_capacity(n),
            comments: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn rest(&self, i: usize) -> &[f32] {
        &self.f_rest[i * self.sh_rest_count..(i + 1) * self.sh_rest_count]
    }

    /// Appends one Gaussian. `rest` must hold exactly `sh_rest_count` values.
    pub fn push(
        &mut self,
        position: [f32; 3],
        f_dc: [f32; 3],
        rest: &[f32],
        opacity: f32,
        scale: [f32; 3],
        rotation: [f32; 4],
    ) {
        assert_eq!(rest.len(), self.sh_rest_count, "rest coefficient count");
        self.positions.push(position);
        self.f_dc.push(f_dc);
        self.f_rest.extend_from_slice(rest);
        self.opacity.push(opacity);
        self.scales.push(scale);
        self.rotations.push(rotation);
    }

    /// Checks that every column agrees with `len()`.
    pub fn columns_consistent(&self) -> bool {
        let n = self.len();
        self.f_dc.len() == n
            && self.f_rest.len() == n * self.sh_rest_count
            && self.opacity.len() == n
            && self.scales.len() == n
            && self.rotations.len() == n
    }

    /// Rows where `keep` is true, in original order.
    pub fn subset(&self, keep: &[bool]) -> Result<GaussianCloud, LengthMismatch> {
        if keep.len() != self.len() {
            return Err(LengthMismatch {
                expected: self.len(),
                got: keep.len(),
            });
        }
        let kept = keep.iter().filter(|&&k| k).count();
        let mut out = GaussianCloud::with_capacity(kept, self.sh_rest_count);
        out.comments = self.comments.clone();
        for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            out.push(
                self.positions[i],
                self.f_dc[i],
                self.rest(i),
                self.opacity[i],
                self.scales[i],
                self.rotations[i],
            );
        }
        Ok(out)
    }

    /// Gathers rows by index. Indices must be in range.
    pub fn select(&self, indices: &[usize]) -> GaussianCloud {
        let mut out = GaussianCloud::with_capacity(indices.len(), self.sh_rest_count);
        out.comments = self.comments.clone();
        for &i in indices {
            out.push(
                self.positions[i],
                self.f_dc[i],
                self.rest(i),
                self.opacity[i],
                self.scales[i],
                self.rotations[i],
            );
        }
        out
    }

    /// Axis-aligned bounds of the positions, `None` when empty.
    pub fn bounds(&self) -> Option<([f32; 3], [f32; 3])> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(mut lo, mut hi), p| {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
            (lo, hi)
        }))
    }
}
