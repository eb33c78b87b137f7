//! Label overlays as RGB images.

use deadwood::grid::Grid;
use deadwood::raster::InstanceMap;
use image::{Rgb, RgbImage};

// Channel levels 64..=255; N = 192^3 colours.
const LEVELS: u64 = 192;
const CUBE: u64 = LEVELS * LEVELS * LEVELS;
// Prime, so coprime to CUBE = 2^18 * 27: `id * STEP mod CUBE` is a bijection.
const STEP: u64 = 1_000_003;

/// Colour of label `id`. Distinct for ids below 192^3 and never darker than
/// 64 in any channel; consecutive ids land far apart in the cube.
pub fn palette(id: u32) -> [u8; 3] {
    let x = (id as u64 % CUBE) * STEP % CUBE;
    let ch = |k: u32| (64 + (x / LEVELS.pow(k)) % LEVELS) as u8;
    [ch(0), ch(1), ch(2)]
}

/// Instances in palette colours over black, or blended with `alpha` over a
/// min-max stretched grayscale `base`.
pub fn render_labels(labels: &InstanceMap, base: Option<&Grid<f32>>, alpha: f64) -> RgbImage {
    let (w, h) = (labels.width(), labels.height());
    let stretch = base.map(|b| {
        let (lo, hi) = b.as_slice().iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = if hi > lo { (hi - lo) as f64 } else { 1.0 };
        (b, lo as f64, span)
    });
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (r, c) = (y as usize, x as usize);
        let gray = stretch.map(|(b, lo, span)| (b[(r, c)] as f64 - lo) / span * 255.0);
        let l = labels.labels[(r, c)];
        let px = match (l, gray) {
            (0, None) => [0.0; 3],
            (0, Some(g)) => [g; 3],
            (l, None) => palette(l).map(f64::from),
            (l, Some(g)) => palette(l).map(|v| alpha * v as f64 + (1.0 - alpha) * g),
        };
        Rgb(px.map(|v| v.round().clamp(0.0, 255.0) as u8))
    })
}
