use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{write_feature_collection, ChannelRole, GeoTransform, MultiChannelRaster};
use crate::error::{Error, Result};
use crate::grid::{Connectivity, Grid, Mask};

/// Integer-labelled raster; 0 is background, `k >= 1` an instance id.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMap {
    pub labels: Grid<u32>,
    pub geo: GeoTransform,
}

// Largest label exactly representable in an f32 payload.
const MAX_F32_LABEL: u32 = 1 << 24;

impl InstanceMap {
    pub fn empty(width: usize, height: usize, geo: GeoTransform) -> Self {
        InstanceMap { labels: Grid::new(width, height), geo }
    }

    pub fn new(labels: Grid<u32>, geo: GeoTransform) -> Self {
        InstanceMap { labels, geo }
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    pub fn max_label(&self) -> u32 {
        self.labels.as_slice().iter().copied().max().unwrap_or(0)
    }

    /// Number of distinct nonzero labels.
    pub fn instance_count(&self) -> usize {
        self.pixel_counts().iter().skip(1).filter(|&&n| n > 0).count()
    }

    /// Pixel count per label, indexed by label (entry 0 is background).
    pub fn pixel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.max_label() as usize + 1];
        for &l in self.labels.as_slice() {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Mean pixel-space position per label, indexed by label.
    pub fn centroids_px(&self) -> Vec<Option<[f64; 2]>> {
        let n = self.max_label() as usize + 1;
        let mut acc = vec![(0.0f64, 0.0f64, 0usize); n];
        for (r, row) in self.labels.rows().enumerate() {
            for (c, &l) in row.iter().enumerate() {
                if l > 0 {
                    let a = &mut acc[l as usize];
                    a.0 += c as f64;
                    a.1 += r as f64;
                    a.2 += 1;
                }
            }
        }
        acc.into_iter().map(|(sx, sy, n)| (n > 0).then(|| [sx / n as f64, sy / n as f64])).collect()
    }

    pub fn mask(&self) -> Mask {
        self.labels.map(|&l| l > 0)
    }

    /// Relabels to `1..=K` in order of first appearance (row-major).
    pub fn compact(&self) -> InstanceMap {
        let mut remap = vec![0u32; self.max_label() as usize + 1];
        let mut next = 0u32;
        let labels = self.labels.map(|&l| {
            if l == 0 {
                return 0;
            }
            let slot = &mut remap[l as usize];
            if *slot == 0 {
                next += 1;
                *slot = next;
            }
            *slot
        });
        InstanceMap { labels, geo: self.geo }
    }

    /// True when every nonzero label forms one connected pixel set.
    pub fn labels_connected(&self, connectivity: Connectivity) -> bool {
        let counts = self.pixel_counts();
        let mut seen = vec![false; counts.len()];
        let mut visited = Grid::filled(self.width(), self.height(), false);
        let mut queue = VecDeque::new();
        for r in 0..self.height() {
            for c in 0..self.width() {
                let l = self.labels[(r, c)];
                if l == 0 || visited[(r, c)] {
                    continue;
                }
                if seen[l as usize] {
                    return false;
                }
                seen[l as usize] = true;
                visited[(r, c)] = true;
                queue.push_back((r, c));
                while let Some((pr, pc)) = queue.pop_front() {
                    for &(dr, dc) in connectivity.offsets() {
                        let (nr, nc) = (pr as isize + dr, pc as isize + dc);
                        if self.labels.get(nr, nc) == Some(&l) && !visited[(nr as usize, nc as usize)] {
                            visited[(nr as usize, nc as usize)] = true;
                            queue.push_back((nr as usize, nc as usize));
                        }
                    }
                }
            }
        }
        true
    }

    pub fn to_raster(&self) -> Result<MultiChannelRaster> {
        if self.max_label() > MAX_F32_LABEL {
            return Err(Error::Validation(format!("label {} not representable as f32", self.max_label())));
        }
        let data = self.labels.as_slice().iter().map(|&l| l as f32).collect();
        MultiChannelRaster::new(self.width(), self.height(), 1, data, self.geo, vec![ChannelRole::Other])
    }

    /// Reads labels from channel 0; values must be non-negative integers.
    pub fn from_raster(raster: &MultiChannelRaster) -> Result<Self> {
        let ch = raster.channel(0)?;
        let mut labels = Vec::with_capacity(ch.len());
        for &v in ch.as_slice() {
            if v < 0.0 || v.fract() != 0.0 || v > MAX_F32_LABEL as f32 {
                return Err(Error::Validation(format!("label value {v} is not a non-negative integer")));
            }
            labels.push(v as u32);
        }
        Ok(InstanceMap { labels: Grid::from_vec(ch.width(), ch.height(), labels)?, geo: raster.geo })
    }
}

/// Moments-based ellipse in pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center_px: [f64; 2],
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from the +x (column) axis, radians.
    pub orientation: f64,
}

/// Vector description of one detected instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: u32,
    /// Closed ring in map units.
    pub polygon: Vec<[f64; 2]>,
    pub centroid_px: [f64; 2],
    pub centroid_map: [f64; 2],
    pub area_px: f64,
    pub area_map: f64,
    pub compactness: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ellipse: Option<Ellipse>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub instances: Vec<Instance>,
}

impl InstanceSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn to_geojson(&self, crs_epsg: Option<u32>, foreign: Map<String, Value>) -> Value {
        let features = self
            .instances
            .iter()
            .map(|inst| {
                let mut props = json!({
                    "id": inst.id,
                    "centroid": inst.centroid_map,
                    "centroid_px": inst.centroid_px,
                    "area_px": inst.area_px,
                    "area_map": inst.area_map,
                    "compactness": inst.compactness,
                });
                if let Some(e) = &inst.ellipse {
                    props["ellipse"] = json!(e);
                }
                json!({
                    "type": "Feature",
                    "properties": props,
                    "geometry": { "type": "Polygon", "coordinates": [inst.polygon] },
                })
            })
            .collect();
        write_feature_collection(features, crs_epsg, foreign)
    }
}
