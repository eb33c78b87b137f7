//! Separable Gaussian smoothing and small morphological helpers.

use crate::grid::{Grid, Mask};
use crate::par;

/// Normalized 1-D Gaussian taps with radius `ceil(4σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Gaussian blur with edge-clamped borders. `sigma <= 0` returns a copy.
pub fn gaussian_blur(src: &Grid<f32>, sigma: f64) -> Grid<f32> {
    if !(sigma.is_finite() && sigma > 0.0) || src.is_empty() {
        return src.clone();
    }
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as isize;
    let (w, h) = (src.width(), src.height());

    let mut tmp = Grid::<f32>::new(w, h);
    par::for_each_chunk_mut(tmp.as_mut_slice(), w, |r, out| {
        let row = &src.as_slice()[r * w..(r + 1) * w];
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0f64;
            for (i, &kv) in k.iter().enumerate() {
                let cc = (c as isize + i as isize - radius).clamp(0, w as isize - 1) as usize;
                acc += kv * row[cc] as f64;
            }
            *o = acc as f32;
        }
    });

    let mut out = Grid::<f32>::new(w, h);
    let tmp_data = tmp.as_slice();
    par::for_each_chunk_mut(out.as_mut_slice(), w, |r, dst| {
        let mut acc = vec![0.0f64; w];
        for (i, &kv) in k.iter().enumerate() {
            let rr = (r as isize + i as isize - radius).clamp(0, h as isize - 1) as usize;
            let src_row = &tmp_data[rr * w..(rr + 1) * w];
            for (a, &v) in acc.iter_mut().zip(src_row) {
                *a += kv * v as f64;
            }
        }
        for (d, a) in dst.iter_mut().zip(acc) {
            *d = a as f32;
        }
    });
    out
}

/// 3x3 (8-neighbourhood) binary dilation.
pub fn dilate_3x3(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    Grid::from_fn(w, h, |r, c| {
        (r.saturating_sub(1)..(r + 2).min(h)).any(|rr| (c.saturating_sub(1)..(c + 2).min(w)).any(|cc| mask[(rr, cc)]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(2.0);
        assert_eq!(k.len(), 17);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k[0], k[16]);
    }

    #[test]
    fn blur_preserves_constants_and_mass() {
        let g = Grid::filled(9, 7, 0.5f32);
        let b = gaussian_blur(&g, 1.5);
        assert!(b.as_slice().iter().all(|&v| (v - 0.5).abs() < 1e-6));
        let mut d = Grid::<f32>::new(41, 41);
        d[(20, 20)] = 1.0;
        let b = gaussian_blur(&d, 2.0);
        let mass: f64 = b.as_slice().iter().map(|&v| v as f64).sum();
        assert!((mass - 1.0).abs() < 1e-6);
        assert_eq!(b[(20, 19)], b[(20, 21)]);
        assert_eq!(gaussian_blur(&d, 0.0), d);
    }

    #[test]
    fn dilation_grows_one_pixel() {
        let mut m = Grid::filled(5, 5, false);
        m[(2, 2)] = true;
        let d = dilate_3x3(&m);
        assert_eq!(d.count_true(), 9);
        assert!(!d[(0, 0)]);
    }
}
