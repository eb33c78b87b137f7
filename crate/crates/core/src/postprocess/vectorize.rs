use super::VectorMode;
use crate::geometry;
use crate::par;
use crate::raster::{Ellipse, GeoTransform, Instance, InstanceMap, InstanceSet};

const ELLIPSE_VERTICES: usize = 64;
/// Offset, in pixels, of the two vertices replacing a diagonal pinch point.
const SADDLE_CUT: f64 = 1e-4;

/// Pixels of one label, in row-major order, plus their bounding box.
struct Blob {
    label: u32,
    pixels: Vec<(usize, usize)>,
    min: (usize, usize),
    max: (usize, usize),
}

fn collect_blobs(map: &InstanceMap) -> Vec<Blob> {
    let mut slots: Vec<Option<Blob>> = (0..=map.max_label()).map(|_| None).collect();
    for (r, row) in map.labels.rows().enumerate() {
        for (c, &l) in row.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let b = slots[l as usize].get_or_insert_with(|| Blob { label: l, pixels: Vec::new(), min: (r, c), max: (r, c) });
            b.pixels.push((r, c));
            b.min = (b.min.0.min(r), b.min.1.min(c));
            b.max = (b.max.0.max(r), b.max.1.max(c));
        }
    }
    slots.into_iter().flatten().collect()
}

/// Converts a label raster into one polygon per nonzero label, ordered by
/// label. Polygons are closed, counter-clockwise rings in map units.
pub fn vectorize(map: &InstanceMap, mode: VectorMode) -> InstanceSet {
    let blobs = collect_blobs(map);
    let geo = map.geo;
    let instances = par::map_slice(&blobs, |b| describe(b, &geo, mode));
    InstanceSet { instances }
}

fn describe(b: &Blob, geo: &GeoTransform, mode: VectorMode) -> Instance {
    let n = b.pixels.len() as f64;
    let mx = b.pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let my = b.pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let ellipse = fit_ellipse(&b.pixels, [mx, my]);
    let ring_px = match mode {
        VectorMode::Contour => outer_contour(b),
        VectorMode::Ellipse => ellipse_ring(&ellipse),
    };
    let mut polygon: Vec<[f64; 2]> = ring_px
        .iter()
        .map(|&[x, y]| match mode {
            // contour vertices are pixel corners
            VectorMode::Contour => [geo.origin_x + x * geo.pixel_size_x, geo.origin_y - y * geo.pixel_size_y],
            VectorMode::Ellipse => geo.pixel_to_map(x, y),
        })
        .collect();
    if geometry::signed_area(&polygon) < 0.0 {
        polygon.reverse();
    }
    polygon.push(polygon[0]);
    let compactness = geometry::compactness(&polygon).unwrap_or(f64::MIN_POSITIVE);
    let centroid_map = geo.pixel_to_map(mx, my);
    Instance {
        id: b.label,
        polygon,
        centroid_px: [mx, my],
        centroid_map,
        area_px: n,
        area_map: n * geo.pixel_area(),
        compactness,
        ellipse: matches!(mode, VectorMode::Ellipse).then_some(ellipse),
    }
}

/// Second-moment ellipse. Each pixel is treated as a unit square, which adds
/// 1/12 to both variances; semi-axes are twice the principal deviations.
fn fit_ellipse(pixels: &[(usize, usize)], [mx, my]: [f64; 2]) -> Ellipse {
    let n = pixels.len() as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(r, c) in pixels {
        let (dx, dy) = (c as f64 - mx, r as f64 - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (a, d, b) = (sxx / n + 1.0 / 12.0, syy / n + 1.0 / 12.0, sxy / n);
    let mid = 0.5 * (a + d);
    let disc = (0.25 * (a - d).powi(2) + b * b).sqrt();
    Ellipse {
        center_px: [mx, my],
        semi_major: 2.0 * (mid + disc).sqrt(),
        semi_minor: 2.0 * (mid - disc).max(0.0).sqrt(),
        orientation: 0.5 * (2.0 * b).atan2(a - d),
    }
}

fn ellipse_ring(e: &Ellipse) -> Vec<[f64; 2]> {
    let (s, c) = e.orientation.sin_cos();
    (0..ELLIPSE_VERTICES)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / ELLIPSE_VERTICES as f64;
            let (u, v) = (e.semi_major * t.cos(), e.semi_minor * t.sin());
            [e.center_px[0] + u * c - v * s, e.center_px[1] + u * s + v * c]
        })
        .collect()
}

/// Traces the pixel-edge boundary of a blob and returns its outer loop in
/// corner coordinates (x = column, y = row), without the closing vertex.
///
/// Directed edges keep the blob on one side. Where two diagonal pixels
/// touch at a corner, the walk continues along the other pixel, so
/// 8-connected pieces share one loop; the corner is then split into two
/// vertices `SADDLE_CUT` apart to keep the ring simple.
fn outer_contour(b: &Blob) -> Vec<[f64; 2]> {
    let (r0, c0) = b.min;
    let bw = b.max.1 - c0 + 1;
    let bh = b.max.0 - r0 + 1;
    let mut inside = vec![false; bw * bh];
    for &(r, c) in &b.pixels {
        inside[(r - r0) * bw + (c - c0)] = true;
    }
    let at =
        |r: isize, c: isize| r >= 0 && c >= 0 && (r as usize) < bh && (c as usize) < bw && inside[r as usize * bw + c as usize];
    let vw = bw + 1;
    let vid = |x: usize, y: usize| y * vw + x;

    // edge = (from, to, owner pixel index)
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    for r in 0..bh {
        for c in 0..bw {
            if !inside[r * bw + c] {
                continue;
            }
            let (ri, ci) = (r as isize, c as isize);
            let owner = r * bw + c;
            if !at(ri - 1, ci) {
                edges.push((vid(c, r), vid(c + 1, r), owner));
            }
            if !at(ri, ci + 1) {
                edges.push((vid(c + 1, r), vid(c + 1, r + 1), owner));
            }
            if !at(ri + 1, ci) {
                edges.push((vid(c + 1, r + 1), vid(c, r + 1), owner));
            }
            if !at(ri, ci - 1) {
                edges.push((vid(c, r + 1), vid(c, r), owner));
            }
        }
    }
    const NONE: usize = usize::MAX;
    let mut out = vec![[NONE; 2]; vw * (bh + 1)];
    for (i, e) in edges.iter().enumerate() {
        let slot = &mut out[e.0];
        if slot[0] == NONE {
            slot[0] = i;
        } else {
            slot[1] = i;
        }
    }
    let next = |e: usize| -> usize {
        let [a, b] = out[edges[e].1];
        if b == NONE || edges[a].2 != edges[e].2 {
            a
        } else {
            b
        }
    };

    let point = |v: usize| [(v % vw + c0) as f64, (v / vw + r0) as f64];
    let dir = |e: usize| {
        let ([ax, ay], [bx, by]) = (point(edges[e].0), point(edges[e].1));
        [bx - ax, by - ay]
    };
    let mut used = vec![false; edges.len()];
    let mut best: Vec<[f64; 2]> = Vec::new();
    let mut best_area = -1.0;
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut seq = Vec::new();
        let mut e = start;
        loop {
            used[e] = true;
            seq.push(e);
            e = next(e);
            if e == start {
                break;
            }
        }
        let mut pts = Vec::with_capacity(seq.len());
        for (i, &e) in seq.iter().enumerate() {
            let v = edges[e].0;
            let p = point(v);
            if out[v][1] == NONE {
                pts.push(p);
            } else {
                // cut the shared corner through the empty quadrant so the
                // ring never touches itself
                let din = dir(seq[(i + seq.len() - 1) % seq.len()]);
                let dout = dir(e);
                pts.push([p[0] - SADDLE_CUT * din[0], p[1] - SADDLE_CUT * din[1]]);
                pts.push([p[0] + SADDLE_CUT * dout[0], p[1] + SADDLE_CUT * dout[1]]);
            }
        }
        let a = geometry::area(&pts);
        if a > best_area {
            best_area = a;
            best = pts;
        }
    }
    drop_collinear(best)
}

fn drop_collinear(pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let n = pts.len();
    (0..n)
        .filter(|&i| {
            let (p, q, s) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            (q[0] - p[0]) * (s[1] - q[1]) - (q[1] - p[1]) * (s[0] - q[0]) != 0.0
        })
        .map(|i| pts[i])
        .collect()
}
