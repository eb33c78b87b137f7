use std::cmp::Reverse;
use std::collections::BinaryHeap;

use log::warn;

use super::MarkerSet;
use crate::error::Result;
use crate::grid::{Connectivity, Grid, Mask};

#[derive(Debug, Clone, PartialEq)]
pub struct Flooded {
    pub labels: Grid<u32>,
    /// Markers outside the mask or on an already seeded pixel.
    pub discarded: usize,
}

/// Maps an f32 to a u32 whose unsigned order equals `f32::total_cmp`.
#[inline]
fn order_key(v: f32) -> u32 {
    let bits = v.to_bits();
    if bits & 0x8000_0000 != 0 {
        !bits
    } else {
        bits | 0x8000_0000
    }
}

/// Marker-controlled watershed by priority flooding.
///
/// Seeds get labels `1..=K` in marker order. Pixels leave the queue in
/// ascending (elevation, insertion sequence) order and hand their label to
/// every unlabelled masked neighbour, which is then queued. Masked regions
/// that no marker reaches stay 0.
pub fn watershed_segment(mask: &Mask, markers: &MarkerSet, elevation: &Grid<f32>, conn: Connectivity) -> Result<Flooded> {
    mask.check_shape(elevation, "watershed_segment")?;
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Grid::<u32>::new(w, h);
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut discarded = 0;
    let mut next = 0u32;
    for m in &markers.markers {
        if m.row >= h || m.col >= w || !mask[(m.row, m.col)] || labels[(m.row, m.col)] != 0 {
            discarded += 1;
            continue;
        }
        next += 1;
        labels[(m.row, m.col)] = next;
        let i = labels.index_of(m.row, m.col);
        heap.push(Reverse((order_key(elevation.as_slice()[i]), seq, i as u32)));
        seq += 1;
    }
    if discarded > 0 {
        warn!("{discarded} watershed marker(s) discarded");
    }
    let offsets = conn.offsets();
    while let Some(Reverse((_, _, i))) = heap.pop() {
        let i = i as usize;
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        let l = labels.as_slice()[i];
        for &(dr, dc) in offsets {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let j = nr as usize * w + nc as usize;
            if mask.as_slice()[j] && labels.as_slice()[j] == 0 {
                labels.as_mut_slice()[j] = l;
                heap.push(Reverse((order_key(elevation.as_slice()[j]), seq, j as u32)));
                seq += 1;
            }
        }
    }
    Ok(Flooded { labels, discarded })
}
