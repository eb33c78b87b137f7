//! Fusion of the three predicted maps into individual tree instances.
//!
//! Stages, each switchable for ablation:
//! 1. threshold the segmentation probability and drop small components,
//! 2. keep only regions that show boundary cues in the hybrid map,
//! 3. smooth the centroid map and pick peaks as markers,
//! 4. flood the negated smoothed centroid map from the markers inside the mask,
//! 5. vectorize the resulting label raster.

mod config;
mod filter;
mod markers;
mod vectorize;
mod watershed;

pub use config::{PeakMetric, PipelineConfig, StagePreset, Stages, VectorMode};
pub use filter::{hybrid_filter, threshold, threshold_and_filter};
pub use markers::{extract_markers, extract_markers_smoothed, Marker, MarkerSet};
pub use vectorize::vectorize;
pub use watershed::{watershed_segment, Flooded};

use std::time::Instant;

use crate::components::label_components_tiled;
use crate::error::{Error, Result};
use crate::filters::gaussian_blur;
use crate::raster::{InstanceMap, InstanceSet, MultiChannelRaster};

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub instances: InstanceMap,
    pub vectors: InstanceSet,
    /// Empty unless the watershed stage ran.
    pub markers: MarkerSet,
    pub discarded_markers: usize,
    /// Wall-clock seconds per executed stage, in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

/// Runs the enabled stages on a (segmentation probability, centroid, hybrid)
/// stack. With every stage disabled the instances are the raw connected
/// components of the thresholded mask.
pub fn run_pipeline(pred: &MultiChannelRaster, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    if pred.channels() != 3 {
        return Err(Error::Dimension(format!(
            "prediction stack needs 3 channels (segmentation, centroid, hybrid), got {}",
            pred.channels()
        )));
    }
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let seg = pred.channel(0)?;
    let mut mask = if cfg.stages.filtering { threshold_and_filter(&seg, cfg) } else { threshold(&seg, cfg.seg_threshold) };
    drop(seg);
    lap("threshold", &mut timings);

    if cfg.stages.hybrid_filtering {
        mask = hybrid_filter(&mask, &pred.channel(2)?, cfg)?;
        lap("hybrid_filter", &mut timings);
    }

    let (labels, markers, discarded) = if cfg.stages.watershed {
        let smoothed = gaussian_blur(&pred.channel(1)?, cfg.smooth_sigma);
        let markers = extract_markers_smoothed(&smoothed, &mask, cfg)?;
        lap("markers", &mut timings);
        let elevation = smoothed.map(|v| -v);
        drop(smoothed);
        let flooded = watershed_segment(&mask, &markers, &elevation, cfg.connectivity)?;
        lap("watershed", &mut timings);
        (flooded.labels, markers, flooded.discarded)
    } else {
        let (labels, _) = label_components_tiled(&mask, cfg.connectivity, cfg.tile_size);
        lap("components", &mut timings);
        (labels, MarkerSet::default(), 0)
    };

    let instances = InstanceMap::new(labels, pred.geo);
    let vectors = vectorize(&instances, cfg.vector_mode);
    lap("vectorize", &mut timings);
    Ok(PipelineOutput { instances, vectors, markers, discarded_markers: discarded, timings })
}
