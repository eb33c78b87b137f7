//! Connected-component labelling, tiled for large rasters.
//!
//! Each tile is flood-filled independently, then labels touching a tile seam
//! are merged through a union-find over label equivalences. Final ids follow
//! first appearance in row-major order, so the result does not depend on the
//! tile size or on the worker schedule.

use std::collections::VecDeque;

use crate::grid::{Connectivity, Grid, Mask};
use crate::par;

pub const DEFAULT_TILE: usize = 1024;

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

struct TileLabels {
    row0: usize,
    col0: usize,
    w: usize,
    h: usize,
    labels: Vec<u32>,
    count: u32,
}

fn label_tile(mask: &Mask, conn: Connectivity, row0: usize, col0: usize, w: usize, h: usize) -> TileLabels {
    let mut labels = vec![0u32; w * h];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            if !mask[(row0 + r, col0 + c)] || labels[r * w + c] != 0 {
                continue;
            }
            count += 1;
            labels[r * w + c] = count;
            queue.push_back((r, c));
            while let Some((pr, pc)) = queue.pop_front() {
                for &(dr, dc) in conn.offsets() {
                    let (nr, nc) = (pr as isize + dr, pc as isize + dc);
                    if nr < 0 || nc < 0 || nr as usize >= h || nc as usize >= w {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    if mask[(row0 + nr, col0 + nc)] && labels[nr * w + nc] == 0 {
                        labels[nr * w + nc] = count;
                        queue.push_back((nr, nc));
                    }
                }
            }
        }
    }
    TileLabels { row0, col0, w, h, labels, count }
}

/// Labels connected foreground components; returns the label grid and the
/// component count.
pub fn label_components(mask: &Mask, conn: Connectivity) -> (Grid<u32>, usize) {
    label_components_tiled(mask, conn, DEFAULT_TILE)
}

pub fn label_components_tiled(mask: &Mask, conn: Connectivity, tile: usize) -> (Grid<u32>, usize) {
    let (w, h) = (mask.width(), mask.height());
    let tile = tile.max(1);
    let (tx, ty) = (w.div_ceil(tile), h.div_ceil(tile));
    let tiles = par::map_range(tx * ty, |i| {
        let (row0, col0) = ((i / tx) * tile, (i % tx) * tile);
        label_tile(mask, conn, row0, col0, tile.min(w - col0), tile.min(h - row0))
    });

    // provisional global label = tile offset + local label
    let mut offsets = Vec::with_capacity(tiles.len());
    let mut total = 0u32;
    for t in &tiles {
        offsets.push(total);
        total += t.count;
    }
    let mut provisional = Grid::<u32>::new(w, h);
    for (t, &off) in tiles.iter().zip(&offsets) {
        for r in 0..t.h {
            for c in 0..t.w {
                let l = t.labels[r * t.w + c];
                if l != 0 {
                    provisional[(t.row0 + r, t.col0 + c)] = off + l;
                }
            }
        }
    }

    let mut uf = UnionFind::new(total as usize + 1);
    let mut link = |a: (usize, usize), b: (isize, isize)| {
        if let Some(&lb) = provisional.get(b.0, b.1) {
            let la = provisional[a];
            if la != 0 && lb != 0 {
                uf.union(la, lb);
            }
        }
    };
    // vertical seams: compare the last column of a tile with its right neighbours
    for col in (tile..w).step_by(tile) {
        for r in 0..h {
            let (ri, ci) = (r as isize, col as isize);
            link((r, col - 1), (ri, ci));
            if conn == Connectivity::Eight {
                link((r, col - 1), (ri - 1, ci));
                link((r, col - 1), (ri + 1, ci));
            }
        }
    }
    // horizontal seams
    for row in (tile..h).step_by(tile) {
        for c in 0..w {
            let (ri, ci) = (row as isize, c as isize);
            link((row - 1, c), (ri, ci));
            if conn == Connectivity::Eight {
                link((row - 1, c), (ri, ci - 1));
                link((row - 1, c), (ri, ci + 1));
            }
        }
    }

    let mut remap = vec![0u32; total as usize + 1];
    let mut next = 0u32;
    let labels = provisional.map(|&l| {
        if l == 0 {
            return 0;
        }
        let root = uf.find(l) as usize;
        if remap[root] == 0 {
            next += 1;
            remap[root] = next;
        }
        remap[root]
    });
    (labels, next as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // recursive flood fill, labels in row-major first-appearance order
    fn oracle(mask: &Mask, conn: Connectivity) -> Grid<u32> {
        fn fill(mask: &Mask, out: &mut Grid<u32>, r: isize, c: isize, l: u32, conn: Connectivity) {
            match mask.get(r, c) {
                Some(true) if out[(r as usize, c as usize)] == 0 => {}
                _ => return,
            }
            out[(r as usize, c as usize)] = l;
            for &(dr, dc) in conn.offsets() {
                fill(mask, out, r + dr, c + dc, l, conn);
            }
        }
        let mut out = Grid::new(mask.width(), mask.height());
        let mut next = 0;
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                if mask[(r, c)] && out[(r, c)] == 0 {
                    next += 1;
                    fill(mask, &mut out, r as isize, c as isize, next, conn);
                }
            }
        }
        out
    }

    #[test]
    fn diagonal_neighbours() {
        let m = Grid::from_vec(2, 2, vec![true, false, false, true]).unwrap();
        assert_eq!(label_components(&m, Connectivity::Eight).1, 1);
        assert_eq!(label_components(&m, Connectivity::Four).1, 2);
    }

    proptest! {
        #[test]
        fn tiled_matches_flood_fill(
            w in 1usize..32, h in 1usize..32, tile in 1usize..9, four in any::<bool>(),
            bits in proptest::collection::vec(any::<bool>(), 1024),
        ) {
            let conn = if four { Connectivity::Four } else { Connectivity::Eight };
            let m = Grid::from_fn(w, h, |r, c| bits[r * 32 + c]);
            let (labels, n) = label_components_tiled(&m, conn, tile);
            let expected = oracle(&m, conn);
            prop_assert_eq!(n as u32, expected.as_slice().iter().copied().max().unwrap_or(0));
            prop_assert_eq!(labels, expected);
        }
    }
}
