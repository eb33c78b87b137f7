use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::components::DEFAULT_TILE;
use crate::error::{Error, Result};
use crate::grid::Connectivity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    /// Minimum-area component filtering after thresholding.
    pub filtering: bool,
    /// Suppression of regions without hybrid-map boundary cues.
    pub hybrid_filtering: bool,
    /// Marker-controlled watershed splitting.
    pub watershed: bool,
}

impl Default for Stages {
    fn default() -> Self {
        StagePreset::Final.stages()
    }
}

/// Named stage combinations matching the ablation rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StagePreset {
    Raw,
    Filter,
    Watershed,
    Final,
}

impl StagePreset {
    pub const ALL: [StagePreset; 4] = [StagePreset::Raw, StagePreset::Filter, StagePreset::Watershed, StagePreset::Final];

    pub fn stages(self) -> Stages {
        let (f, w) = match self {
            StagePreset::Raw => (false, false),
            StagePreset::Filter => (true, false),
            StagePreset::Watershed => (false, true),
            StagePreset::Final => (true, true),
        };
        Stages { filtering: f, hybrid_filtering: f, watershed: w }
    }

    pub fn name(self) -> &'static str {
        match self {
            StagePreset::Raw => "raw",
            StagePreset::Filter => "filter",
            StagePreset::Watershed => "watershed",
            StagePreset::Final => "final",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            StagePreset::Raw => "Raw Segments",
            StagePreset::Filter => "Segment Filtering",
            StagePreset::Watershed => "Watershed Segmentation",
            StagePreset::Final => "Final Segmentation",
        }
    }
}

impl FromStr for StagePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StagePreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown stage preset {s:?} (raw|filter|watershed|final)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeakMetric {
    #[default]
    Euclidean,
    Chebyshev,
}

impl PeakMetric {
    pub fn distance(self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let dr = a.0.abs_diff(b.0) as f64;
        let dc = a.1.abs_diff(b.1) as f64;
        match self {
            PeakMetric::Euclidean => dr.hypot(dc),
            PeakMetric::Chebyshev => dr.max(dc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorMode {
    #[default]
    Contour,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seg_threshold: f64,
    pub min_area: usize,
    pub boundary_threshold: f64,
    pub boundary_presence_fraction: f64,
    pub smooth_sigma: f64,
    pub peak_min_distance: f64,
    pub peak_min_intensity: f64,
    pub peak_metric: PeakMetric,
    pub connectivity: Connectivity,
    pub stages: Stages,
    pub vector_mode: VectorMode,
    /// Tile edge for component labelling, in pixels.
    pub tile_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seg_threshold: 0.5,
            min_area: 16,
            boundary_threshold: -0.5,
            boundary_presence_fraction: 0.05,
            smooth_sigma: 2.0,
            peak_min_distance: 5.0,
            peak_min_intensity: 0.1,
            peak_metric: PeakMetric::Euclidean,
            connectivity: Connectivity::Eight,
            stages: Stages::default(),
            vector_mode: VectorMode::Contour,
            tile_size: DEFAULT_TILE,
        }
    }
}

impl PipelineConfig {
    pub fn with_preset(mut self, preset: StagePreset) -> Self {
        self.stages = preset.stages();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let open01 = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be in (0, 1), got {v}")))
            }
        };
        open01("seg_threshold", self.seg_threshold)?;
        open01("peak_min_intensity", self.peak_min_intensity)?;
        if self.min_area < 1 {
            return Err(Error::Parameter("min_area must be >= 1".into()));
        }
        if !(self.boundary_threshold > -1.0 && self.boundary_threshold < 0.0) {
            return Err(Error::Parameter(format!("boundary_threshold must be in (-1, 0), got {}", self.boundary_threshold)));
        }
        if !(0.0..=1.0).contains(&self.boundary_presence_fraction) {
            return Err(Error::Parameter(format!(
                "boundary_presence_fraction must be in [0, 1], got {}",
                self.boundary_presence_fraction
            )));
        }
        if !(self.smooth_sigma.is_finite() && self.smooth_sigma > 0.0) {
            return Err(Error::Parameter(format!("smooth_sigma must be > 0, got {}", self.smooth_sigma)));
        }
        if !(self.peak_min_distance.is_finite() && self.peak_min_distance >= 1.0) {
            return Err(Error::Parameter(format!("peak_min_distance must be >= 1, got {}", self.peak_min_distance)));
        }
        if self.tile_size == 0 {
            return Err(Error::Parameter("tile_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        assert_eq!(StagePreset::Raw.stages(), Stages { filtering: false, hybrid_filtering: false, watershed: false });
        assert_eq!(StagePreset::Final.stages(), Stages { filtering: true, hybrid_filtering: true, watershed: true });
        assert_eq!("watershed".parse::<StagePreset>().unwrap(), StagePreset::Watershed);
        assert!("bogus".parse::<StagePreset>().is_err());
    }

    #[test]
    fn json_overrides_and_validation() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"min_area": 4, "connectivity": 4, "stages": {"watershed": false}}"#).unwrap();
        assert_eq!(cfg.min_area, 4);
        assert_eq!(cfg.connectivity, Connectivity::Four);
        assert!(cfg.stages.filtering && !cfg.stages.watershed);
        assert!(PipelineConfig { seg_threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(PipelineConfig { boundary_threshold: 0.2, ..Default::default() }.validate().is_err());
        assert!(PipelineConfig { peak_min_distance: 0.5, ..Default::default() }.validate().is_err());
        assert!(PipelineConfig::default().validate().is_ok());
    }

    #[test]
    fn metrics() {
        assert_eq!(PeakMetric::Euclidean.distance((0, 0), (3, 4)), 5.0);
        assert_eq!(PeakMetric::Chebyshev.distance((0, 0), (3, 4)), 4.0);
    }
}
