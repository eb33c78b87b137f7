//! Ground-truth supervision rasters for the three prediction heads:
//! binary crown mask, centroid heatmap, and the hybrid boundary/distance map.

use log::warn;

use crate::distance::squared_distance;
use crate::error::{Error, Result};
use crate::grid::{Grid, Mask};
use crate::par;
use crate::raster::{Annotation, ChannelRole, GeoTransform, InstanceMap, MultiChannelRaster};

pub const DEFAULT_HEATMAP_SIGMA: f64 = 3.0;

/// Kernels are evaluated out to this many sigmas.
const TRUNCATE_SIGMAS: f64 = 4.0;

/// Result of burning polygons into a label raster.
#[derive(Debug, Clone)]
pub struct Rasterized {
    /// Label `k` is polygon `k - 1`; later polygons overwrite earlier ones.
    pub map: InstanceMap,
    /// Indices of polygons that cover no pixel center.
    pub dropped: Vec<usize>,
}

/// Burns polygons (map units) into an `height x width` label raster. A pixel
/// takes label `k` when its center lies inside polygon `k - 1`.
pub fn rasterize_polygons(polygons: &[Vec<[f64; 2]>], geo: GeoTransform, shape: (usize, usize)) -> Result<Rasterized> {
    let (h, w) = shape;
    if h == 0 || w == 0 {
        return Err(Error::Parameter(format!("raster shape must be positive, got {h}x{w}")));
    }
    let mut labels = Grid::<u32>::new(w, h);
    let mut dropped = Vec::new();
    let mut xs = Vec::new();
    for (k, poly) in polygons.iter().enumerate() {
        let mut px: Vec<[f64; 2]> = poly.iter().map(|p| geo.map_to_pixel(p[0], p[1])).collect();
        if px.len() > 1 && px.first() != px.last() {
            px.push(px[0]);
        }
        let (ymin, ymax) = px.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[1]), hi.max(p[1])));
        let r0 = ymin.ceil().max(0.0) as usize;
        let r1 = (ymax.floor().min(h as f64 - 1.0)).max(-1.0);
        let mut burned = 0usize;
        if r1 >= 0.0 {
            for r in r0..=r1 as usize {
                let y = r as f64;
                xs.clear();
                for e in px.windows(2) {
                    let (a, b) = (e[0], e[1]);
                    if (a[1] > y) != (b[1] > y) {
                        xs.push(a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                    }
                }
                xs.sort_by(f64::total_cmp);
                for span in xs.chunks_exact(2) {
                    // inside iff span[0] <= x < span[1]
                    let c0 = span[0].ceil().max(0.0);
                    let c1 = span[1].ceil().min(w as f64);
                    if c1 > c0 {
                        for c in c0 as usize..c1 as usize {
                            labels[(r, c)] = k as u32 + 1;
                        }
                        burned += (c1 - c0) as usize;
                    }
                }
            }
        }
        if burned == 0 {
            dropped.push(k);
        }
    }
    if !dropped.is_empty() {
        warn!("{} polygon(s) cover no pixel center and were dropped", dropped.len());
    }
    Ok(Rasterized { map: InstanceMap::new(labels, geo), dropped })
}

/// Max-combined, peak-normalized Gaussian kernels centered on pixel-space
/// points.
pub fn render_centroid_heatmap(centroids: &[[f64; 2]], sigma: f64, shape: (usize, usize)) -> Result<Grid<f32>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Parameter(format!("heatmap sigma must be > 0, got {sigma}")));
    }
    let (h, w) = shape;
    let mut out = Grid::<f32>::new(w, h);
    let radius = TRUNCATE_SIGMAS * sigma;
    let denom = 2.0 * sigma * sigma;
    for &[cx, cy] in centroids {
        let c0 = (cx - radius).ceil().max(0.0);
        let c1 = (cx + radius).floor().min(w as f64 - 1.0);
        let r0 = (cy - radius).ceil().max(0.0);
        let r1 = (cy + radius).floor().min(h as f64 - 1.0);
        if c1 < c0 || r1 < r0 {
            continue;
        }
        for r in r0 as usize..=r1 as usize {
            for c in c0 as usize..=c1 as usize {
                let (dx, dy) = (c as f64 - cx, r as f64 - cy);
                let v = (-(dx * dx + dy * dy) / denom).exp() as f32;
                let cell = &mut out[(r, c)];
                if v > *cell {
                    *cell = v;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
}

fn label_bboxes(labels: &Grid<u32>) -> Vec<Option<BBox>> {
    let n = labels.as_slice().iter().copied().max().unwrap_or(0) as usize + 1;
    let mut boxes: Vec<Option<BBox>> = vec![None; n];
    for (r, row) in labels.rows().enumerate() {
        for (c, &l) in row.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let b = boxes[l as usize].get_or_insert(BBox { r0: r, c0: c, r1: r, c1: c });
            b.r0 = b.r0.min(r);
            b.c0 = b.c0.min(c);
            b.r1 = b.r1.max(r);
            b.c1 = b.c1.max(c);
        }
    }
    boxes
}

/// True for a labelled pixel with a 4-neighbour of another label, of
/// background, or outside the raster.
pub fn is_boundary_pixel(labels: &Grid<u32>, r: usize, c: usize) -> bool {
    let l = labels[(r, c)];
    l != 0
        && [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
            .iter()
            .any(|&(dr, dc)| labels.get(r as isize + dr, c as isize + dc) != Some(&l))
}

/// Hybrid boundary/distance map: instance boundary pixels are −1, interior
/// pixels carry the distance to their instance's boundary divided by that
/// instance's maximum, background is 0.
pub fn compute_sdt_boundary(instances: &InstanceMap) -> Grid<f32> {
    let labels = &instances.labels;
    let boxes: Vec<(u32, BBox)> =
        label_bboxes(labels).into_iter().enumerate().filter_map(|(l, b)| b.map(|b| (l as u32, b))).collect();

    let per_instance = par::map_slice(&boxes, |&(l, b)| {
        let (bw, bh) = (b.c1 - b.c0 + 1, b.r1 - b.r0 + 1);
        let boundary =
            Grid::from_fn(bw, bh, |r, c| labels[(b.r0 + r, b.c0 + c)] == l && is_boundary_pixel(labels, b.r0 + r, b.c0 + c));
        let d2 = squared_distance(&boundary);
        let mut pixels = Vec::new();
        let mut d_max = 0.0f64;
        for r in 0..bh {
            for c in 0..bw {
                if labels[(b.r0 + r, b.c0 + c)] != l {
                    continue;
                }
                let d = if boundary[(r, c)] { 0.0 } else { d2[(r, c)].sqrt() };
                d_max = d_max.max(d);
                pixels.push(((b.r0 + r) * labels.width() + b.c0 + c, boundary[(r, c)], d));
            }
        }
        pixels.into_iter().map(|(i, on_boundary, d)| (i, if on_boundary { -1.0 } else { (d / d_max) as f32 })).collect::<Vec<_>>()
    });

    let mut out = Grid::<f32>::new(labels.width(), labels.height());
    for (i, v) in per_instance.into_iter().flatten() {
        out.as_mut_slice()[i] = v;
    }
    out
}

/// Supervision targets for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetStack {
    pub mask: Mask,
    pub centroid_heatmap: Grid<f32>,
    pub hybrid: Grid<f32>,
    /// Label `k` is annotation `k - 1`.
    pub instances: InstanceMap,
    /// Pixel-space centroid per annotation.
    pub centroids_px: Vec<[f64; 2]>,
    pub dropped: Vec<usize>,
}

pub fn build_target_stack(
    annotations: &[Annotation],
    geo: GeoTransform,
    shape: (usize, usize),
    sigma: f64,
) -> Result<TargetStack> {
    let polygons: Vec<Vec<[f64; 2]>> = annotations.iter().map(|a| a.polygon.clone()).collect();
    let Rasterized { map, dropped } = rasterize_polygons(&polygons, geo, shape)?;
    let centroids_px: Vec<[f64; 2]> = annotations.iter().map(|a| geo.map_to_pixel(a.centroid[0], a.centroid[1])).collect();
    let kept: Vec<[f64; 2]> = centroids_px.iter().enumerate().filter(|(i, _)| !dropped.contains(i)).map(|(_, &c)| c).collect();
    let centroid_heatmap = render_centroid_heatmap(&kept, sigma, shape)?;
    let hybrid = compute_sdt_boundary(&map);
    Ok(TargetStack { mask: map.mask(), centroid_heatmap, hybrid, instances: map, centroids_px, dropped })
}

impl TargetStack {
    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    /// Three-channel raster in (mask, centroid, hybrid) order.
    pub fn to_raster(&self) -> Result<MultiChannelRaster> {
        let mask = self.mask.map(|&b| if b { 1.0f32 } else { 0.0 });
        MultiChannelRaster::from_channels(
            &[&mask, &self.centroid_heatmap, &self.hybrid],
            self.instances.geo,
            vec![ChannelRole::Segmentation, ChannelRole::Centroid, ChannelRole::Hybrid],
        )
    }

    /// Lists every broken target invariant; empty when the stack is valid.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let labels = &self.instances.labels;
        let (h, w) = self.shape();
        for r in 0..h {
            for c in 0..w {
                let l = labels[(r, c)];
                if self.mask[(r, c)] != (l > 0) {
                    out.push(format!("mask/label disagree at ({r},{c})"));
                }
                let hm = self.centroid_heatmap[(r, c)];
                if !(0.0..=1.0).contains(&hm) {
                    out.push(format!("heatmap {hm} out of [0,1] at ({r},{c})"));
                }
                let hy = self.hybrid[(r, c)];
                if !(-1.0..=1.0).contains(&hy) {
                    out.push(format!("hybrid {hy} out of [-1,1] at ({r},{c})"));
                }
                if l == 0 && hy != 0.0 {
                    out.push(format!("background hybrid {hy} at ({r},{c})"));
                }
                if l > 0 && is_boundary_pixel(labels, r, c) && hy != -1.0 {
                    out.push(format!("boundary pixel ({r},{c}) has hybrid {hy}"));
                }
            }
        }
        let n = self.instances.max_label() as usize + 1;
        let mut max_v = vec![f32::NEG_INFINITY; n];
        let mut interior = vec![false; n];
        for r in 0..h {
            for c in 0..w {
                let l = labels[(r, c)] as usize;
                if l > 0 {
                    max_v[l] = max_v[l].max(self.hybrid[(r, c)]);
                    interior[l] |= !is_boundary_pixel(labels, r, c);
                }
            }
        }
        for l in 1..n {
            if interior[l] && max_v[l] != 1.0 {
                out.push(format!("instance {l} hybrid maximum is {} not 1", max_v[l]));
            }
        }
        // The pixel nearest each centroid is the unique heatmap maximum over
        // the part of its instance that lies closer to that centroid than to
        // any other rendered one. An occluding crown may hold an earlier
        // crown's peak, which the proximity restriction excludes.
        let rendered: Vec<usize> = (0..self.centroids_px.len()).filter(|k| !self.dropped.contains(k)).collect();
        let d2 = |k: usize, r: usize, c: usize| {
            let [cx, cy] = self.centroids_px[k];
            (c as f64 - cx).powi(2) + (r as f64 - cy).powi(2)
        };
        let mut peak: Vec<Option<(usize, usize, f32)>> = vec![None; n];
        for &k in &rendered {
            let [cx, cy] = self.centroids_px[k];
            let (r, c) = (cy.round(), cx.round());
            if r < 0.0 || c < 0.0 || r >= h as f64 || c >= w as f64 {
                continue;
            }
            let (r, c) = (r as usize, c as usize);
            if labels[(r, c)] as usize == k + 1 {
                peak[k + 1] = Some((r, c, self.centroid_heatmap[(r, c)]));
            }
        }
        for r in 0..h {
            for c in 0..w {
                let l = labels[(r, c)] as usize;
                let Some((pr, pc, pv)) = (l > 0).then(|| peak[l]).flatten() else { continue };
                if (r, c) == (pr, pc) || self.centroid_heatmap[(r, c)] < pv {
                    continue;
                }
                let own = d2(l - 1, r, c);
                if rendered.iter().all(|&j| j == l - 1 || d2(j, r, c) > own) {
                    out.push(format!("instance {l}: heatmap peak at ({pr},{pc}) not unique"));
                }
            }
        }
        out
    }
}
