//! Pipeline variants and default parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::outlier::OutlierConfig;

pub const DEFAULT_TAU: f64 = 0.40;
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_P_SPATIAL: f64 = 99.0;
pub const DEFAULT_P_NEIGHBOR: f64 = 95.0;
pub const DEFAULT_MIN_VIEWS: u32 = 2;
/// A stage may not remove more than this fraction of its input.
pub const DEFAULT_MAX_STAGE_REMOVAL: f64 = 0.995;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Whitelist and color validation only.
    Basic,
    /// Basic plus k-NN outlier removal.
    Neighbor,
    /// Basic plus centroid-distance outlier removal.
    Spatial,
    /// Whitelist with `m` views, color validation, k-NN removal.
    Multiview,
    /// Whitelist with `m` views, color validation, union of both outlier rules.
    Combined,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Basic,
        Variant::Neighbor,
        Variant::Spatial,
        Variant::Multiview,
        Variant::Combined,
    ];

    pub fn uses_min_views(self) -> bool {
        matches!(self, Variant::Multiview | Variant::Combined)
    }

    pub fn uses_spatial(self) -> bool {
        matches!(self, Variant::Spatial | Variant::Combined)
    }

    pub fn uses_neighbor(self) -> bool {
        matches!(self, Variant::Neighbor | Variant::Multiview | Variant::Combined)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Basic => "basic",
            Variant::Neighbor => "neighbor",
            Variant::Spatial => "spatial",
            Variant::Multiview => "multiview",
            Variant::Combined => "combined",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant '{s}' (expected basic, neighbor, spatial, multiview or combined)"))
    }
}

/// Algorithm parameters; independent of any file paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneParams {
    pub variant: Variant,
    pub tau: f64,
    pub k: usize,
    pub p_spatial: f64,
    pub p_neighbor: f64,
    pub min_views: u32,
    pub max_stage_removal: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        Self {
            variant: Variant::Neighbor,
            tau: DEFAULT_TAU,
            k: DEFAULT_K,
            p_spatial: DEFAULT_P_SPATIAL,
            p_neighbor: DEFAULT_P_NEIGHBOR,
            min_views: DEFAULT_MIN_VIEWS,
            max_stage_removal: DEFAULT_MAX_STAGE_REMOVAL,
        }
    }
}

impl PruneParams {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    /// The whitelist threshold actually applied: `min_views` in multi-view
    /// variants, 1 otherwise.
    pub fn effective_min_views(&self) -> u32 {
        if self.variant.uses_min_views() {
            self.min_views
        } else {
            1
        }
    }

    pub fn outlier_config(&self) -> OutlierConfig {
        OutlierConfig {
            k: self.k,
            p_spatial: self.p_spatial,
            p_neighbor: self.p_neighbor,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau > 0.0) {
            return Err(format!("tau must be positive, got {}", self.tau));
        }
        if self.k == 0 {
            return Err("k must be positive".into());
        }
        for (name, p) in [("p_spatial", self.p_spatial), ("p_neighbor", self.p_neighbor)] {
            if !(p > 0.0 && p < 100.0) {
                return Err(format!("{name} must be in (0, 100), got {p}"));
            }
        }
        if self.min_views == 0 {
            return Err("min_views must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.max_stage_removal) {
            return Err(format!("max stage removal must be in [0, 1], got {}", self.max_stage_removal));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_pinned() {
        let p = PruneParams::default();
        assert_eq!(p.tau, 0.40);
        assert_eq!(p.k, 10);
        assert_eq!(p.p_spatial, 99.0);
        assert_eq!(p.p_neighbor, 95.0);
        assert_eq!(p.min_views, 2);
        assert_eq!(p.variant, Variant::Neighbor);
        p.validate().unwrap();
    }

    #[test]
    fn variant_applicability() {
        assert_eq!(PruneParams::for_variant(Variant::Basic).effective_min_views(), 1);
        assert_eq!(PruneParams::for_variant(Variant::Combined).effective_min_views(), 2);
        assert!(Variant::Combined.uses_spatial() && Variant::Combined.uses_neighbor());
        assert!(!Variant::Basic.uses_spatial() && !Variant::Basic.uses_neighbor());
        assert!(Variant::Multiview.uses_neighbor() && !Variant::Multiview.uses_spatial());
    }

    #[test]
    fn parse_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("clean".parse::<Variant>().is_err());
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let bad = [
            PruneParams { tau: 0.0, ..Default::default() },
            PruneParams { k: 0, ..Default::default() },
            PruneParams { p_neighbor: 100.0, ..Default::default() },
            PruneParams { min_views: 0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
