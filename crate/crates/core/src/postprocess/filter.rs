use super::PipelineConfig;
use crate::components::label_components_tiled;
use crate::error::Result;
use crate::filters::dilate_3x3;
use crate::grid::{Grid, Mask};
use crate::par;

/// `prob >= threshold`, pixelwise.
pub fn threshold(prob: &Grid<f32>, threshold: f64) -> Mask {
    let (w, h) = (prob.width(), prob.height());
    let mut out = Grid::filled(w, h, false);
    let src = prob.as_slice();
    par::for_each_chunk_mut(out.as_mut_slice(), w.max(1), |r, row| {
        for (c, o) in row.iter_mut().enumerate() {
            *o = src[r * w + c] as f64 >= threshold;
        }
    });
    out
}

/// Thresholds, then removes connected components smaller than `min_area`.
pub fn threshold_and_filter(prob: &Grid<f32>, cfg: &PipelineConfig) -> Mask {
    let mask = threshold(prob, cfg.seg_threshold);
    let (labels, n) = label_components_tiled(&mask, cfg.connectivity, cfg.tile_size);
    let mut area = vec![0usize; n + 1];
    for &l in labels.as_slice() {
        area[l as usize] += 1;
    }
    labels.map(|&l| l != 0 && area[l as usize] >= cfg.min_area)
}

/// Keeps each connected region of `mask` whose outline shows boundary cues:
/// at least one outline pixel, and at least `boundary_presence_fraction` of
/// them, lie within one pixel of a hybrid value `<= boundary_threshold`.
/// The outline is the set of region pixels with a 4-neighbour outside the
/// region.
pub fn hybrid_filter(mask: &Mask, hybrid: &Grid<f32>, cfg: &PipelineConfig) -> Result<Mask> {
    mask.check_shape(hybrid, "hybrid_filter")?;
    let cue = dilate_3x3(&hybrid.map(|&v| v as f64 <= cfg.boundary_threshold));
    let (labels, n) = label_components_tiled(mask, cfg.connectivity, cfg.tile_size);
    let mut outline = vec![0usize; n + 1];
    let mut hits = vec![0usize; n + 1];
    for r in 0..labels.height() {
        for c in 0..labels.width() {
            let l = labels[(r, c)];
            if l == 0 {
                continue;
            }
            let on_outline = [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|&(dr, dc)| labels.get(r as isize + dr, c as isize + dc) != Some(&l));
            if on_outline {
                outline[l as usize] += 1;
                if cue[(r, c)] {
                    hits[l as usize] += 1;
                }
            }
        }
    }
    let keep: Vec<bool> =
        (0..=n).map(|l| l > 0 && hits[l] > 0 && hits[l] as f64 >= cfg.boundary_presence_fraction * outline[l] as f64).collect();
    Ok(labels.map(|&l| keep[l as usize]))
}
