//! Raster and vector data model shared by every stage, plus file I/O.
//!
//! The raster container is a single file: one UTF-8 JSON header line ending
//! in `\n`, then the raw little-endian `f32` payload in row-major,
//! channel-last order.

mod annotations;
mod geo;
mod instance;

pub use annotations::{parse_annotations, read_annotations, write_feature_collection, Annotation, AnnotationCollection};
pub use geo::GeoTransform;
pub use instance::{Ellipse, Instance, InstanceMap, InstanceSet};

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DTYPE_F32LE: &str = "f32le";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelRole {
    Segmentation,
    Centroid,
    Hybrid,
    ImageBand,
    Other,
}

/// Dense float raster with `channels` interleaved values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelRaster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
    pub geo: GeoTransform,
    pub channel_roles: Vec<ChannelRole>,
}

impl MultiChannelRaster {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
        geo: GeoTransform,
        channel_roles: Vec<ChannelRole>,
    ) -> Result<Self> {
        let r = MultiChannelRaster { width, height, channels, data, geo, channel_roles };
        r.validate()?;
        Ok(r)
    }

    pub fn zeros(width: usize, height: usize, channels: usize, geo: GeoTransform) -> Result<Self> {
        Self::new(width, height, channels, vec![0.0; width * height * channels], geo, vec![ChannelRole::Other; channels])
    }

    /// Interleaves single-channel grids of identical shape.
    pub fn from_channels(channels: &[&Grid<f32>], geo: GeoTransform, roles: Vec<ChannelRole>) -> Result<Self> {
        let first = channels.first().ok_or_else(|| Error::Validation("raster needs at least one channel".into()))?;
        for ch in channels {
            first.check_shape(ch, "channel shapes differ")?;
        }
        let n = channels.len();
        let mut data = vec![0.0f32; first.len() * n];
        for (k, ch) in channels.iter().enumerate() {
            for (i, &v) in ch.as_slice().iter().enumerate() {
                data[i * n + k] = v;
            }
        }
        Self::new(first.width(), first.height(), n, data, geo, roles)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Validation("channels must be >= 1".into()));
        }
        if self.data.len() != self.width * self.height * self.channels {
            return Err(Error::Dimension(format!(
                "data length {} != {}x{}x{}",
                self.data.len(),
                self.width,
                self.height,
                self.channels
            )));
        }
        if self.channel_roles.len() != self.channels {
            return Err(Error::Validation(format!("{} channel roles for {} channels", self.channel_roles.len(), self.channels)));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at payload index {i}")));
        }
        self.geo.validate()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Copies one channel out as a grid.
    pub fn channel(&self, k: usize) -> Result<Grid<f32>> {
        if k >= self.channels {
            return Err(Error::Dimension(format!("channel {k} out of {}", self.channels)));
        }
        let data = self.data.iter().skip(k).step_by(self.channels).copied().collect();
        Grid::from_vec(self.width, self.height, data)
    }

    /// Copies the window `[row0, row0+h) x [col0, col0+w)`, zero-filling
    /// anything past the raster edge.
    pub fn window(&self, row0: usize, col0: usize, w: usize, h: usize) -> MultiChannelRaster {
        let n = self.channels;
        let mut data = vec![0.0f32; w * h * n];
        for r in 0..h {
            let sr = row0 + r;
            if sr >= self.height {
                break;
            }
            let cols = w.min(self.width.saturating_sub(col0));
            let src = (sr * self.width + col0) * n;
            data[r * w * n..(r * w + cols) * n].copy_from_slice(&self.data[src..src + cols * n]);
        }
        MultiChannelRaster {
            width: w,
            height: h,
            channels: n,
            data,
            geo: self.geo.offset(row0, col0),
            channel_roles: self.channel_roles.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    width: usize,
    height: usize,
    channels: usize,
    dtype: String,
    geotransform: [f64; 4],
    channel_roles: Vec<ChannelRole>,
}

/// Serializes a raster to its container bytes.
pub fn encode_raster(raster: &MultiChannelRaster) -> Result<Vec<u8>> {
    raster.validate()?;
    let header = Header {
        width: raster.width,
        height: raster.height,
        channels: raster.channels,
        dtype: DTYPE_F32LE.to_string(),
        geotransform: raster.geo.to_signed_array(),
        channel_roles: raster.channel_roles.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(raster.data.len() * 4);
    for v in &raster.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_raster(reader: impl Read) -> Result<MultiChannelRaster> {
    let mut reader = BufReader::new(reader);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line).map_err(|e| Error::Format(format!("reading header: {e}")))?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("header line is not newline-terminated".into()));
    }
    line.pop();
    let header: Header = serde_json::from_slice(&line).map_err(|e| Error::Format(e.to_string()))?;
    if header.dtype != DTYPE_F32LE {
        return Err(Error::Format(format!("unsupported dtype {:?}", header.dtype)));
    }
    let expected = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(header.channels))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("raster dimensions overflow".into()))?;
    let mut payload = Vec::with_capacity(expected);
    reader.read_to_end(&mut payload).map_err(|e| Error::Format(format!("reading payload: {e}")))?;
    if payload.len() != expected {
        return Err(Error::Truncated { expected, actual: payload.len() });
    }
    let data = payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    let geo = GeoTransform::from_signed_array(header.geotransform)?;
    MultiChannelRaster::new(header.width, header.height, header.channels, data, geo, header.channel_roles)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<MultiChannelRaster> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_raster(file)
}

pub fn write_raster(raster: &MultiChannelRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_raster(raster)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
