//! Precision and recall of a keep-vector against synthetic ground truth.

use serde::{Deserialize, Serialize};

use crate::cloud::LengthMismatch;
use crate::synth::{Category, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Kept mask-visible objects over all mask-visible objects.
    pub object_recall: f64,
    /// Removed background and floaters over all background and floaters.
    pub clutter_removal_rate: f64,
    /// Kept objects over all kept Gaussians.
    pub precision: f64,
    /// `1 - kept / total`.
    pub compression: f64,
    pub total: usize,
    pub kept: usize,
    pub visible_objects: usize,
    pub kept_visible_objects: usize,
    pub kept_objects: usize,
    pub clutter: usize,
    pub removed_clutter: usize,
}

// Empty denominators score as perfect.
fn frac(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn score(keep: &[bool], labels: &[Label]) -> Result<Metrics, LengthMismatch> {
    if keep.len() != labels.len() {
        return Err(LengthMismatch {
            expected: labels.len(),
            got: keep.len(),
        });
    }
    let mut m = Metrics {
        object_recall: 0.0,
        clutter_removal_rate: 0.0,
        precision: 0.0,
        compression: 0.0,
        total: keep.len(),
        kept: 0,
        visible_objects: 0,
        kept_visible_objects: 0,
        kept_objects: 0,
        clutter: 0,
        removed_clutter: 0,
    };
    for (&k, l) in keep.iter().zip(labels) {
        m.kept += k as usize;
        if l.category == Category::Object {
            m.kept_objects += k as usize;
            if l.mask_visible {
                m.visible_objects += 1;
                m.kept_visible_objects += k as usize;
            }
        } else {
            m.clutter += 1;
            m.removed_clutter += !k as usize;
        }
    }
    m.object_recall = frac(m.kept_visible_objects, m.visible_objects);
    m.clutter_removal_rate = frac(m.removed_clutter, m.clutter);
    m.precision = frac(m.kept_objects, m.kept);
    m.compression = 1.0 - frac(m.kept, m.total);
    Ok(m)
}

/// Expands ascending kept indices into a keep-vector of length `n`.
pub fn keep_from_indices(n: usize, indices: &[usize]) -> Option<Vec<bool>> {
    let mut keep = vec![false; n];
    for &i in indices {
        *keep.get_mut(i)? = true;
    }
    Some(keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<Label> {
        let l = |category, mask_visible| Label { category, mask_visible };
        vec![
            l(Category::Object, true),
            l(Category::Object, true),
            l(Category::Object, false),
            l(Category::Background, false),
            l(Category::Floater, true),
            l(Category::Floater, false),
        ]
    }

    #[test]
    fn oracle_keep_scores_perfectly() {
        let labels = labels();
        let keep: Vec<bool> = labels.iter().map(|l| l.category == Category::Object).collect();
        let m = score(&keep, &labels).unwrap();
        assert_eq!((m.object_recall, m.clutter_removal_rate, m.precision), (1.0, 1.0, 1.0));
        assert_eq!(m.compression, 0.5);
    }

    #[test]
    fn keep_all_removes_no_clutter() {
        let labels = labels();
        let m = score(&vec![true; labels.len()], &labels).unwrap();
        assert_eq!(m.clutter_removal_rate, 0.0);
        assert_eq!(m.object_recall, 1.0);
        assert_eq!(m.precision, 0.5);
        assert_eq!(m.compression, 0.0);
    }

    #[test]
    fn hand_counted_mixture() {
        // keeps one visible object, the invisible object and one floater
        let keep = [true, false, true, false, true, false];
        let m = score(&keep, &labels()).unwrap();
        assert_eq!(m.object_recall, 0.5);
        assert!((m.clutter_removal_rate - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.compression, 0.5);
    }

    #[test]
    fn length_mismatch() {
        assert!(score(&[true], &labels()).is_err());
    }

    #[test]
    fn indices_expand() {
        assert_eq!(keep_from_indices(4, &[0, 2]), Some(vec![true, false, true, false]));
        assert_eq!(keep_from_indices(2, &[2]), None);
    }
}
