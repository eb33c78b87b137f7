//! Synthetic scenes: random crown polygons, their supervision targets, and a
//! corrupted copy of the targets standing in for network predictions.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::gaussian_blur;
use crate::grid::Grid;
use crate::par;
use crate::raster::{write_raster, Annotation, AnnotationCollection, GeoTransform, MultiChannelRaster};
use crate::targets::{build_target_stack, TargetStack, DEFAULT_HEATMAP_SIGMA};

const CROWN_VERTICES: usize = 48;
/// Upper bound on the summed harmonic amplitudes of a crown outline.
const MAX_PERTURBATION: f64 = 0.16;
/// Minimum clearance between crowns that are not meant to overlap.
const MIN_GAP_PX: f64 = 2.0;

/// Noise standard deviation for all three prediction channels, or one per
/// channel in (segmentation, centroid, hybrid) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSigma {
    Uniform(f64),
    PerChannel([f64; 3]),
}

impl NoiseSigma {
    pub fn channels(self) -> [f64; 3] {
        match self {
            NoiseSigma::Uniform(s) => [s; 3],
            NoiseSigma::PerChannel(s) => s,
        }
    }
}

impl Default for NoiseSigma {
    fn default() -> Self {
        NoiseSigma::Uniform(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    /// (height, width) in pixels.
    pub extent: [usize; 2],
    /// Ground sampling distance in map units per pixel.
    pub pixel_size: f64,
    /// Map coordinates of the top-left corner.
    pub origin: [f64; 2],
    /// Expected crowns per hectare, assuming metre map units.
    pub density: f64,
    /// Nominal crown radius range in pixels.
    pub crown_radius_range: [f64; 2],
    /// Chance that a crown is placed overlapping an earlier one.
    pub overlap_probability: f64,
    pub noise_sigma: NoiseSigma,
    pub blur_sigma: f64,
    pub heatmap_sigma: f64,
    /// Placement attempts per crown before giving up.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            extent: [1024, 1024],
            pixel_size: 0.25,
            origin: [0.0, 0.0],
            density: 2.0,
            crown_radius_range: [6.0, 14.0],
            overlap_probability: 0.0,
            noise_sigma: NoiseSigma::default(),
            blur_sigma: 0.0,
            heatmap_sigma: DEFAULT_HEATMAP_SIGMA,
            max_attempts: 2000,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.extent[0] == 0 || self.extent[1] == 0 {
            return bad(format!("extent must be nonzero, got {:?}", self.extent));
        }
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return bad(format!("density must be >= 0, got {}", self.density));
        }
        let [lo, hi] = self.crown_radius_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("crown_radius_range must be positive and ordered, got {:?}", self.crown_radius_range));
        }
        if !(0.0..=1.0).contains(&self.overlap_probability) {
            return bad(format!("overlap_probability must be in [0, 1], got {}", self.overlap_probability));
        }
        if self.noise_sigma.channels().iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("noise_sigma must be >= 0".into());
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return bad(format!("blur_sigma must be >= 0, got {}", self.blur_sigma));
        }
        if !(self.heatmap_sigma > 0.0 && self.heatmap_sigma.is_finite()) {
            return bad(format!("heatmap_sigma must be positive, got {}", self.heatmap_sigma));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive".into());
        }
        GeoTransform::new(self.origin[0], self.origin[1], self.pixel_size, self.pixel_size)?;
        Ok(())
    }

    pub fn geo(&self) -> GeoTransform {
        GeoTransform {
            origin_x: self.origin[0],
            origin_y: self.origin[1],
            pixel_size_x: self.pixel_size,
            pixel_size_y: self.pixel_size,
        }
    }

    /// Expected crown count: density × area in hectares.
    pub fn expected_count(&self) -> f64 {
        let area_m2 = (self.extent[0] * self.extent[1]) as f64 * self.pixel_size * self.pixel_size;
        self.density * area_m2 / 10_000.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub annotations: Vec<Annotation>,
    pub targets: TargetStack,
    pub prediction: MultiChannelRaster,
}

/// A crown footprint in pixel space before conversion to map units.
#[derive(Debug, Clone)]
struct Crown {
    center: [f64; 2],
    /// Radius of a circle enclosing the outline.
    bound: f64,
    outline: Vec<[f64; 2]>,
}

fn sample_crown<R: Rng>(rng: &mut R, center: [f64; 2], radius: f64) -> Crown {
    let aspect = rng.random_range(0.75..=1.0);
    let theta = rng.random_range(0.0..TAU);
    let a2 = rng.random_range(0.0..MAX_PERTURBATION / 2.0);
    let a3 = rng.random_range(0.0..MAX_PERTURBATION / 2.0);
    let p2 = rng.random_range(0.0..TAU);
    let p3 = rng.random_range(0.0..TAU);
    let (s, c) = theta.sin_cos();
    let outline = (0..CROWN_VERTICES)
        .map(|k| {
            let phi = TAU * k as f64 / CROWN_VERTICES as f64;
            let rho = 1.0 + a2 * (2.0 * phi + p2).cos() + a3 * (3.0 * phi + p3).cos();
            let (u, v) = (radius * rho * phi.cos(), radius * aspect * rho * phi.sin());
            [center[0] + u * c - v * s, center[1] + u * s + v * c]
        })
        .collect();
    Crown { center, bound: radius * (1.0 + MAX_PERTURBATION), outline }
}

/// Dart-throwing placement. Each crown either keeps `MIN_GAP_PX` clear of
/// all others or, with `overlap_probability`, is centred 0.5–0.9 of the
/// summed radii away from one earlier crown while clearing the rest.
fn place_crowns<R: Rng>(rng: &mut R, spec: &SceneSpec, count: usize) -> Result<Vec<Crown>> {
    let (h, w) = (spec.extent[0] as f64, spec.extent[1] as f64);
    let [rlo, rhi] = spec.crown_radius_range;
    let mut crowns: Vec<Crown> = Vec::with_capacity(count);
    for i in 0..count {
        let radius = if rlo == rhi { rlo } else { rng.random_range(rlo..rhi) };
        let bound = radius * (1.0 + MAX_PERTURBATION);
        if 2.0 * bound >= w.min(h) {
            return Err(Error::Placement(format!(
                "crown radius {radius:.1} px does not fit a {}x{} scene",
                spec.extent[0], spec.extent[1]
            )));
        }
        let overlapping = !crowns.is_empty() && rng.random::<f64>() < spec.overlap_probability;
        let mut placed = None;
        for _ in 0..spec.max_attempts {
            let (center, partner) = if overlapping {
                let j = rng.random_range(0..crowns.len());
                let d = rng.random_range(0.5..0.9) * (bound + crowns[j].bound);
                let phi = rng.random_range(0.0..TAU);
                ([crowns[j].center[0] + d * phi.cos(), crowns[j].center[1] + d * phi.sin()], Some(j))
            } else {
                ([rng.random_range(bound..w - bound), rng.random_range(bound..h - bound)], None)
            };
            let inside = center[0] >= bound && center[0] <= w - bound && center[1] >= bound && center[1] <= h - bound;
            let clear = crowns.iter().enumerate().all(|(k, o)| {
                Some(k) == partner || (o.center[0] - center[0]).hypot(o.center[1] - center[1]) >= o.bound + bound + MIN_GAP_PX
            });
            if inside && clear {
                placed = Some(center);
                break;
            }
        }
        let Some(center) = placed else {
            return Err(Error::Placement(format!(
                "could not place crown {} of {count} after {} attempts",
                i + 1,
                spec.max_attempts
            )));
        };
        crowns.push(sample_crown(rng, center, radius));
    }
    Ok(crowns)
}

fn corrupt<R: Rng>(rng: &mut R, src: &Grid<f32>, blur: f64, sigma: f64, lo: f32, hi: f32) -> Grid<f32> {
    let mut out = gaussian_blur(src, blur);
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma validated");
        for v in out.as_mut_slice() {
            *v += normal.sample(rng) as f32;
        }
    }
    for v in out.as_mut_slice() {
        *v = v.clamp(lo, hi);
    }
    out
}

/// Builds one scene. Output depends only on `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lambda = spec.expected_count();
    let count = if lambda > 0.0 {
        Poisson::new(lambda).map_err(|e| Error::Parameter(format!("density: {e}")))?.sample(&mut rng) as usize
    } else {
        0
    };
    let crowns = place_crowns(&mut rng, spec, count)?;
    let geo = spec.geo();
    let annotations = crowns
        .iter()
        .map(|c| {
            let mut ring: Vec<[f64; 2]> = c
                .outline
                .iter()
                .map(|&[x, y]| [geo.origin_x + x * geo.pixel_size_x, geo.origin_y - y * geo.pixel_size_y])
                .collect();
            ring.push(ring[0]);
            Annotation::from_polygon(ring)
        })
        .collect::<Result<Vec<_>>>()?;
    let shape = (spec.extent[0], spec.extent[1]);
    let targets = build_target_stack(&annotations, geo, shape, spec.heatmap_sigma)?;

    let [ns, nc, nh] = spec.noise_sigma.channels();
    let mask = targets.mask.map(|&b| if b { 1.0f32 } else { 0.0 });
    let seg = corrupt(&mut rng, &mask, spec.blur_sigma, ns, 0.0, 1.0);
    let cen = corrupt(&mut rng, &targets.centroid_heatmap, spec.blur_sigma, nc, 0.0, 1.0);
    let hyb = corrupt(&mut rng, &targets.hybrid, 0.0, nh, -1.0, 1.0);
    let prediction = MultiChannelRaster::from_channels(&[&seg, &cen, &hyb], geo, targets.to_raster()?.channel_roles)?;
    Ok(Scene { spec: spec.clone(), annotations, targets, prediction })
}

/// Generates scenes in parallel; each scene is built on one thread.
pub fn generate_scenes(specs: &[SceneSpec]) -> Result<Vec<Scene>> {
    par::map_slice(specs, generate_scene).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub spec: SceneSpec,
    pub annotations: String,
    pub targets: String,
    pub prediction: String,
    pub crowns: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub scenes: Vec<CorpusEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn write_scene(scene: &Scene, name: &str, dir: &Path) -> Result<CorpusEntry> {
    let entry = CorpusEntry {
        name: name.to_string(),
        spec: scene.spec.clone(),
        annotations: format!("{name}.geojson"),
        targets: format!("{name}_targets.raster"),
        prediction: format!("{name}_pred.raster"),
        crowns: scene.annotations.len(),
    };
    let collection = AnnotationCollection { crs_epsg: None, annotations: scene.annotations.clone() };
    let path = dir.join(&entry.annotations);
    let text = serde_json::to_string_pretty(&collection.to_geojson())?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    write_raster(&scene.targets.to_raster()?, dir.join(&entry.targets))?;
    write_raster(&scene.prediction, dir.join(&entry.prediction))?;
    Ok(entry)
}

/// Generates every spec, writes scene files plus `manifest.json` into `dir`.
pub fn write_corpus(specs: &[SceneSpec], dir: &Path) -> Result<CorpusManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scenes = par::map_slice(&specs.iter().enumerate().collect::<Vec<_>>(), |&(i, spec)| {
        let scene = generate_scene(spec)?;
        write_scene(&scene, &format!("scene_{i:04}"), dir)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let manifest = CorpusManifest { scenes };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rewrites the corpus described by a manifest from its stored specs.
pub fn regenerate(manifest: &CorpusManifest, dir: &Path) -> Result<CorpusManifest> {
    let specs: Vec<SceneSpec> = manifest.scenes.iter().map(|e| e.spec.clone()).collect();
    write_corpus(&specs, dir)
}

/// `n` copies of `base` with seeds `base.seed, base.seed + 1, …`.
pub fn seed_sweep(base: &SceneSpec, n: usize) -> Vec<SceneSpec> {
    (0..n as u64).map(|i| SceneSpec { seed: base.seed.wrapping_add(i), ..base.clone() }).collect()
}
