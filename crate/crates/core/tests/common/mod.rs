//! Reference implementations and scene generators shared by the test targets.
#![allow(dead_code)]

use deadwood::grid::{Connectivity, Grid, Mask};
use deadwood::losses::LossValue;
use deadwood::metrics::MatchedPair;
use deadwood::postprocess::{Marker, MarkerSet};
use deadwood::raster::{GeoTransform, InstanceMap};
use deadwood::Result;
use rand::Rng;

/// Priority flood with a linear scan for the minimum instead of a heap.
pub fn naive_watershed(mask: &Mask, markers: &MarkerSet, elev: &Grid<f32>, conn: Connectivity) -> Grid<u32> {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Grid::<u32>::new(w, h);
    // (elevation, sequence, row, col)
    let mut frontier: Vec<(f32, usize, usize, usize)> = Vec::new();
    let mut seq = 0;
    let mut next = 0;
    for m in &markers.markers {
        if m.row < h && m.col < w && mask[(m.row, m.col)] && labels[(m.row, m.col)] == 0 {
            next += 1;
            labels[(m.row, m.col)] = next;
            frontier.push((elev[(m.row, m.col)], seq, m.row, m.col));
            seq += 1;
        }
    }
    while !frontier.is_empty() {
        let mut best = 0;
        for i in 1..frontier.len() {
            let (a, b) = (frontier[i], frontier[best]);
            if a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt() {
                best = i;
            }
        }
        let (_, _, r, c) = frontier.remove(best);
        let l = labels[(r, c)];
        for &(dr, dc) in conn.offsets() {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if mask.get(nr, nc) == Some(&true) && labels[(nr as usize, nc as usize)] == 0 {
                labels[(nr as usize, nc as usize)] = l;
                frontier.push((elev[(nr as usize, nc as usize)], seq, nr as usize, nc as usize));
                seq += 1;
            }
        }
    }
    labels
}

/// Random masked scene with coarse elevation levels, so ties are common.
pub fn random_flood_scene<R: Rng>(rng: &mut R) -> (Mask, MarkerSet, Grid<f32>) {
    let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
    let fill = rng.random_range(0.3..1.0);
    let mask = Grid::from_fn(w, h, |_, _| rng.random::<f64>() < fill);
    let levels = rng.random_range(1..6);
    let elev = Grid::from_fn(w, h, |_, _| rng.random_range(0..levels) as f32 - 2.0);
    let k = rng.random_range(0..=4);
    let markers = (0..k).map(|_| Marker { row: rng.random_range(0..h), col: rng.random_range(0..w), intensity: 1.0 }).collect();
    (mask, MarkerSet { markers }, elev)
}

/// Label map with up to `max_n` random rectangles painted in order.
pub fn random_rect_map<R: Rng>(rng: &mut R, w: usize, h: usize, max_n: usize) -> InstanceMap {
    let mut g = Grid::<u32>::new(w, h);
    let n = rng.random_range(0..=max_n);
    for k in 1..=n {
        let (rw, rh) = (rng.random_range(2..=w / 2), rng.random_range(2..=h / 2));
        let (r0, c0) = (rng.random_range(0..=h - rh), rng.random_range(0..=w - rw));
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                g[(r, c)] = k as u32;
            }
        }
    }
    InstanceMap::new(g, GeoTransform::default())
}

/// Best achievable summed IoU by trying every partial one-to-one assignment.
pub fn brute_force_best(candidates: &[MatchedPair]) -> f64 {
    let mut preds: Vec<u32> = candidates.iter().map(|c| c.pred_id).collect();
    preds.sort_unstable();
    preds.dedup();
    fn go(i: usize, preds: &[u32], cands: &[MatchedPair], used: &mut Vec<u32>) -> f64 {
        if i == preds.len() {
            return 0.0;
        }
        let mut best = go(i + 1, preds, cands, used);
        for c in cands.iter().filter(|c| c.pred_id == preds[i]) {
            if !used.contains(&c.gt_id) {
                used.push(c.gt_id);
                best = best.max(c.iou + go(i + 1, preds, cands, used));
                used.pop();
            }
        }
        best
    }
    go(0, &preds, candidates, &mut Vec::new())
}

/// Largest relative deviation between the analytic gradient of `f` and a
/// central difference with step `h`, over every entry of every channel.
pub fn max_gradient_error(x: &[Grid<f64>], h: f64, f: impl Fn(&[Grid<f64>]) -> Result<LossValue>) -> f64 {
    let analytic = f(x).unwrap().gradient;
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        for i in 0..x[k].len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k].as_mut_slice()[i] += h;
            xm[k].as_mut_slice()[i] -= h;
            let num = (f(&xp).unwrap().total - f(&xm).unwrap().total) / (2.0 * h);
            let a = analytic[k].as_slice()[i];
            let scale = a.abs().max(num.abs()).max(1e-12);
            worst = worst.max((a - num).abs() / scale);
        }
    }
    worst
}

/// Uniform value in `[lo, hi)` kept at least `gap` away from every point in
/// `avoid`.
pub fn away_from<R: Rng>(rng: &mut R, lo: f64, hi: f64, avoid: &[f64], gap: f64) -> f64 {
    loop {
        let v = rng.random_range(lo..hi);
        if avoid.iter().all(|a| (v - a).abs() > gap) {
            return v;
        }
    }
}

/// Random convex-ish polygons in map units of an identity geotransform
/// (map y = −row).
pub fn random_polygons<R: Rng>(rng: &mut R, w: usize, h: usize, max_n: usize) -> Vec<Vec<[f64; 2]>> {
    (0..rng.random_range(0..=max_n))
        .map(|_| {
            let cx = rng.random_range(0.0..w as f64);
            let cy = rng.random_range(0.0..h as f64);
            let r = rng.random_range(1.0..(w.min(h) as f64 / 2.0).max(1.5));
            let n = rng.random_range(3..9);
            let mut ring: Vec<[f64; 2]> = (0..n)
                .map(|k| {
                    let t = std::f64::consts::TAU * (k as f64 + rng.random_range(0.0..0.8)) / n as f64;
                    let rr = r * rng.random_range(0.5..1.0);
                    [cx + rr * t.cos(), -(cy + rr * t.sin())]
                })
                .collect();
            ring.push(ring[0]);
            ring
        })
        .collect()
}
