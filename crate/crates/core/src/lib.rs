//! Non-neural core of a dead-tree instance segmentation system.
//!
//! * [`targets`] turns crown polygons into the three supervision rasters
//!   (mask, centroid heatmap, hybrid boundary/distance map).
//! * [`losses`] evaluates the multi-task training loss with analytic gradients.
//! * [`postprocess`] fuses predicted maps into individual tree instances
//!   (thresholding, boundary-cue filtering, centroid markers, watershed).
//! * [`metrics`] scores instances against ground truth and tests paired
//!   differences for significance.
//! * [`splitter`] cuts overlapping patches and assigns spatial clusters to
//!   train/validation/test partitions.
//! * [`synth`] generates synthetic scenes with known ground truth.
//!
//! Data-parallel loops go through [`par`]; the `parallel` feature (on by
//! default) runs them on rayon. Results are identical either way.

pub mod ablation;
pub mod components;
pub mod distance;
pub mod error;
pub mod filters;
pub mod geometry;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod par;
pub mod postprocess;
pub mod raster;
pub mod splitter;
pub mod synth;
pub mod targets;

pub use error::{Error, Result};
pub use grid::{Connectivity, Grid, Mask};
pub use raster::{
    read_annotations, read_raster, write_raster, Annotation, ChannelRole, GeoTransform, Instance, InstanceMap, InstanceSet,
    MultiChannelRaster,
};
