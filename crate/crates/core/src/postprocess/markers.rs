use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::PipelineConfig;
use crate::error::Result;
use crate::filters::gaussian_blur;
use crate::grid::{Grid, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub row: usize,
    pub col: usize,
    pub intensity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerSet {
    pub markers: Vec<Marker>,
}

impl MarkerSet {
    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }
}

/// Smooths the centroid map with `smooth_sigma` and picks peaks inside `mask`.
pub fn extract_markers(centroid_map: &Grid<f32>, mask: &Mask, cfg: &PipelineConfig) -> Result<MarkerSet> {
    let smoothed = gaussian_blur(centroid_map, cfg.smooth_sigma);
    extract_markers_smoothed(&smoothed, mask, cfg)
}

/// Peak selection on an already smoothed map.
///
/// Candidates are mask pixels with intensity `>= peak_min_intensity` that
/// are not exceeded by any 8-neighbour inside the mask. They are visited by
/// descending intensity, ties by (row, col), and accepted when at least
/// `peak_min_distance` away from every accepted marker.
pub fn extract_markers_smoothed(smoothed: &Grid<f32>, mask: &Mask, cfg: &PipelineConfig) -> Result<MarkerSet> {
    smoothed.check_shape(mask, "extract_markers")?;
    let (w, h) = (mask.width(), mask.height());
    let mut candidates = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask[(r, c)] {
                continue;
            }
            let v = smoothed[(r, c)];
            if (v as f64) < cfg.peak_min_intensity {
                continue;
            }
            let dominated = (r.saturating_sub(1)..(r + 2).min(h))
                .flat_map(|rr| (c.saturating_sub(1)..(c + 2).min(w)).map(move |cc| (rr, cc)))
                .any(|(rr, cc)| mask[(rr, cc)] && smoothed[(rr, cc)] > v);
            if !dominated {
                candidates.push((v, r, c));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    // accepted markers bucketed on a grid of `peak_min_distance` cells
    let cell = cfg.peak_min_distance.ceil().max(1.0) as usize;
    let mut buckets: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    let mut markers = Vec::new();
    for (v, r, c) in candidates {
        let (br, bc) = (r / cell, c / cell);
        let too_close = (br.saturating_sub(1)..=br + 1).any(|rr| {
            (bc.saturating_sub(1)..=bc + 1).any(|cc| {
                buckets
                    .get(&(rr, cc))
                    .is_some_and(|pts| pts.iter().any(|&p| cfg.peak_metric.distance(p, (r, c)) < cfg.peak_min_distance))
            })
        });
        if !too_close {
            buckets.entry((br, bc)).or_default().push((r, c));
            markers.push(Marker { row: r, col: c, intensity: v as f64 });
        }
    }
    Ok(MarkerSet { markers })
}
