use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// North-up affine georeference.
///
/// `origin_*` is the outer corner of pixel (0, 0). Pixel sizes are stored
/// positive; rows grow southward. In pixel space pixel `(row, col)` has its
/// center at `(x, y) = (col, row)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
}

impl Default for GeoTransform {
    fn default() -> Self {
        GeoTransform { origin_x: 0.0, origin_y: 0.0, pixel_size_x: 1.0, pixel_size_y: 1.0 }
    }
}

// Values within this many pixels of an integer are snapped to it.
const SNAP_EPS: f64 = 1e-6;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r
    } else {
        v
    }
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, pixel_size_x: f64, pixel_size_y: f64) -> Result<Self> {
        let g = GeoTransform { origin_x, origin_y, pixel_size_x, pixel_size_y };
        g.validate()?;
        Ok(g)
    }

    /// Unit pixels with the origin at (0, 0): map coordinates then differ
    /// from pixel coordinates only by the half-pixel shift and y flip.
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.origin_x, self.origin_y, self.pixel_size_x, self.pixel_size_y].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Validation("geotransform has non-finite entries".into()));
        }
        if self.pixel_size_x <= 0.0 || self.pixel_size_y <= 0.0 {
            return Err(Error::Validation(format!(
                "pixel sizes must be positive, got ({}, {})",
                self.pixel_size_x, self.pixel_size_y
            )));
        }
        Ok(())
    }

    /// Pixel-space `(x, y)` (pixel centers at integers) to map coordinates.
    pub fn pixel_to_map(&self, x: f64, y: f64) -> [f64; 2] {
        [self.origin_x + (x + 0.5) * self.pixel_size_x, self.origin_y - (y + 0.5) * self.pixel_size_y]
    }

    /// Map coordinates to pixel space; inverse of [`pixel_to_map`](Self::pixel_to_map).
    pub fn map_to_pixel(&self, mx: f64, my: f64) -> [f64; 2] {
        [snap((mx - self.origin_x) / self.pixel_size_x - 0.5), snap((self.origin_y - my) / self.pixel_size_y - 0.5)]
    }

    /// Transform of a window whose top-left pixel is `(row, col)` here.
    pub fn offset(&self, row: usize, col: usize) -> GeoTransform {
        GeoTransform {
            origin_x: self.origin_x + col as f64 * self.pixel_size_x,
            origin_y: self.origin_y - row as f64 * self.pixel_size_y,
            ..*self
        }
    }

    /// Area of one pixel in map units squared.
    pub fn pixel_area(&self) -> f64 {
        self.pixel_size_x * self.pixel_size_y
    }

    /// GDAL-ordered signed form `[origin_x, origin_y, size_x, -size_y]`.
    pub fn to_signed_array(&self) -> [f64; 4] {
        [self.origin_x, self.origin_y, self.pixel_size_x, -self.pixel_size_y]
    }

    pub fn from_signed_array(a: [f64; 4]) -> Result<Self> {
        if a[3] >= 0.0 {
            return Err(Error::Validation(format!("geotransform y pixel size must be negative (north-up), got {}", a[3])));
        }
        GeoTransform::new(a[0], a[1], a[2], -a[3])
    }
}
