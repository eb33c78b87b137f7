//! Planar polygon helpers. Rings are slices of `[x, y]` vertices; a closed
//! ring repeats its first vertex at the end.

use crate::error::{Error, Result};

pub type Ring = [[f64; 2]];

pub fn is_closed(ring: &Ring) -> bool {
    ring.len() >= 4 && ring.first() == ring.last()
}

/// Iterates the edges of a ring, closing it implicitly if needed.
fn edges(ring: &Ring) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
    let n = ring.len();
    let closed = n > 1 && ring[0] == ring[n - 1];
    let m = if closed { n - 1 } else { n };
    (0..m).map(move |i| (ring[i], ring[(i + 1) % m]))
}

/// Shoelace signed area (positive for counter-clockwise in a y-up frame).
pub fn signed_area(ring: &Ring) -> f64 {
    0.5 * edges(ring).map(|(a, b)| a[0] * b[1] - b[0] * a[1]).sum::<f64>()
}

pub fn area(ring: &Ring) -> f64 {
    signed_area(ring).abs()
}

pub fn perimeter(ring: &Ring) -> f64 {
    edges(ring).map(|(a, b)| (b[0] - a[0]).hypot(b[1] - a[1])).sum()
}

/// Area-weighted centroid. Falls back to the vertex mean for zero-area rings.
pub fn centroid(ring: &Ring) -> [f64; 2] {
    // shift to the first vertex so large map coordinates don't cancel
    let o = ring[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for (p, q) in edges(ring) {
        let (px, py, qx, qy) = (p[0] - o[0], p[1] - o[1], q[0] - o[0], q[1] - o[1]);
        let cross = px * qy - qx * py;
        a2 += cross;
        cx += (px + qx) * cross;
        cy += (py + qy) * cross;
    }
    if a2.abs() < f64::EPSILON * 16.0 {
        let pts: Vec<_> = edges(ring).map(|(a, _)| a).collect();
        let n = pts.len().max(1) as f64;
        return [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n];
    }
    [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]
}

/// Even-odd point-in-ring test, half-open on edges.
pub fn contains(ring: &Ring, x: f64, y: f64) -> bool {
    let mut inside = false;
    for (a, b) in edges(ring) {
        if (a[1] > y) != (b[1] > y) {
            let xc = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if x < xc {
                inside = !inside;
            }
        }
    }
    inside
}

/// `4π·area/perimeter²`, clamped to (0, 1].
pub fn compactness(ring: &Ring) -> Result<f64> {
    let p = perimeter(ring);
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Validation("degenerate polygon: zero perimeter".into()));
    }
    let c = 4.0 * std::f64::consts::PI * area(ring) / (p * p);
    Ok(c.clamp(f64::MIN_POSITIVE, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rect(w: f64, h: f64) -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [w, 0.0], [w, h], [0.0, h], [0.0, 0.0]]
    }

    #[test]
    fn square_measures() {
        let sq = rect(2.0, 2.0);
        assert!(is_closed(&sq));
        assert_eq!(area(&sq), 4.0);
        assert_eq!(perimeter(&sq), 8.0);
        assert_eq!(centroid(&sq), [1.0, 1.0]);
        assert!((compactness(&sq).unwrap() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn compactness_values() {
        let c = compactness(&rect(1.0, 10.0)).unwrap();
        assert!((c - 40.0 * PI / 484.0).abs() < 1e-12);
        let n = 4096;
        let circle: Vec<[f64; 2]> = (0..=n)
            .map(|i| {
                let t = 2.0 * PI * (i % n) as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        assert!((compactness(&circle).unwrap() - 1.0).abs() < 1e-6);
        assert!(compactness(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn contains_respects_orientation_and_holes_of_concavity() {
        let l = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0], [0.0, 0.0]];
        assert!(contains(&l, 0.5, 1.5));
        assert!(!contains(&l, 1.5, 1.5));
        let rev: Vec<_> = l.iter().rev().copied().collect();
        assert!(contains(&rev, 1.5, 0.5));
        assert!((signed_area(&l) + signed_area(&rev)).abs() < 1e-15);
    }
}
