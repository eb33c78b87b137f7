//! Exact Euclidean distance transform (separable lower-envelope method).

use crate::grid::{Grid, Mask};

/// One-dimensional squared distance transform of a sampled function `f`
/// (infinite where there is no source).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    let n = f.len();
    v.clear();
    v.resize(n, 0);
    z.clear();
    z.resize(n + 1, 0.0);
    let intersect = |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    let mut k = 0;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for (q, fq) in f.iter().enumerate().skip(first + 1) {
        if !fq.is_finite() {
            continue;
        }
        // z[0] is -inf, so k never underflows
        let mut s = intersect(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance from each pixel to the nearest `true` pixel.
/// Infinite everywhere when `sources` has no `true` pixel.
pub fn squared_distance(sources: &Mask) -> Grid<f64> {
    let (w, h) = (sources.width(), sources.height());
    let mut g = sources.map(|&s| if s { 0.0 } else { f64::INFINITY });
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut col = vec![0.0; h];
    let mut res = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = g[(r, c)];
        }
        edt_1d(&col, &mut res, &mut v, &mut z);
        for r in 0..h {
            g[(r, c)] = res[r];
        }
    }
    let mut row = vec![0.0; w];
    for r in 0..h {
        let slice = &mut g.as_mut_slice()[r * w..(r + 1) * w];
        row.copy_from_slice(slice);
        edt_1d(&row, slice, &mut v, &mut z);
    }
    g
}
