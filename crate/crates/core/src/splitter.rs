//! Overlapping patch extraction and spatially clustered train / validation /
//! test partitioning.

use std::collections::{BTreeMap, HashMap};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::MultiChannelRaster;

pub const DEFAULT_PATCH_SIZE: usize = 256;
pub const DEFAULT_OVERLAP: f64 = 0.5;
pub const DEFAULT_BIN_SIZE: f64 = 1000.0;
pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.2, 0.1];

/// Patch start offsets along one axis of length `dim`.
///
/// Origins step by `size·(1 − overlap)` (at least 1). Without padding a
/// last origin at `dim − size` is added when the stride overshoots; with
/// padding the last patch may run past the border.
pub fn patch_origins(dim: usize, size: usize, overlap: f64, pad: bool) -> Result<Vec<usize>> {
    if size == 0 {
        return Err(Error::Parameter("patch size must be positive".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Parameter(format!("overlap must be in [0, 1), got {overlap}")));
    }
    if dim == 0 {
        return Err(Error::Dimension("cannot cut patches from an empty image".into()));
    }
    let stride = ((size as f64 * (1.0 - overlap)).floor() as usize).max(1);
    if dim < size {
        return if pad {
            Ok(vec![0])
        } else {
            Err(Error::Dimension(format!("image dimension {dim} is smaller than patch size {size}")))
        };
    }
    let mut out = Vec::new();
    let mut o = 0;
    loop {
        out.push(o);
        if o + size >= dim {
            break;
        }
        if !pad && o + stride + size > dim {
            out.push(dim - size);
            break;
        }
        o += stride;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub row0: usize,
    pub col0: usize,
    /// Carries the geotransform of its own top-left pixel.
    pub raster: MultiChannelRaster,
}

pub fn extract_patches(image: &MultiChannelRaster, size: usize, overlap: f64, pad: bool) -> Result<Vec<Patch>> {
    let rows = patch_origins(image.height(), size, overlap, pad)?;
    let cols = patch_origins(image.width(), size, overlap, pad)?;
    let origins: Vec<(usize, usize)> = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
    Ok(par::map_slice(&origins, |&(row0, col0)| Patch { row0, col0, raster: image.window(row0, col0, size, size) }))
}

/// Input record for clustering: one patch with its map-space centre and the
/// number of annotated objects it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchInfo {
    pub id: usize,
    pub centroid: [f64; 2],
    pub segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCluster {
    pub cluster_id: usize,
    pub members: Vec<usize>,
    /// Occupied `(x_bin, y_bin)` cells, sorted.
    pub bins: Vec<(i64, i64)>,
    pub segments: usize,
}

/// Hashes patches into square bins of `bin_size` map units and joins
/// occupied bins that touch, including diagonally. Clusters are numbered by
/// their smallest bin.
pub fn bin_and_cluster(patches: &[PatchInfo], bin_size: f64) -> Result<Vec<RegionCluster>> {
    if !(bin_size > 0.0 && bin_size.is_finite()) {
        return Err(Error::Parameter(format!("bin_size must be positive, got {bin_size}")));
    }
    let mut by_bin: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in patches.iter().enumerate() {
        if !p.centroid.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(format!("patch {} has a non-finite centroid", p.id)));
        }
        let key = ((p.centroid[0] / bin_size).floor() as i64, (p.centroid[1] / bin_size).floor() as i64);
        by_bin.entry(key).or_default().push(i);
    }
    let keys: Vec<(i64, i64)> = by_bin.keys().copied().collect();
    let index: HashMap<(i64, i64), usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut parent: Vec<usize> = (0..keys.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, &(bx, by)) in keys.iter().enumerate() {
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&j) = index.get(&(bx + dx, by + dy)) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    // roots are the smallest key index of each cluster, so BTreeMap order
    // numbers clusters by smallest bin
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..keys.len() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    Ok(groups
        .into_values()
        .enumerate()
        .map(|(cluster_id, bins)| {
            let mut members: Vec<usize> = bins.iter().flat_map(|&b| by_bin[&keys[b]].iter().map(|&i| patches[i].id)).collect();
            members.sort_unstable();
            let segments = bins.iter().flat_map(|&b| by_bin[&keys[b]].iter()).map(|&i| patches[i].segments).sum();
            RegionCluster { cluster_id, members, bins: bins.iter().map(|&b| keys[b]).collect(), segments }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Validation, Partition::Test];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub partition: Partition,
    pub target_fraction: f64,
    pub clusters: usize,
    pub patches: usize,
    pub segments: usize,
    /// Share of all segments that landed here.
    pub segment_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: [f64; 3],
    /// Partition per cluster id.
    pub assignment: BTreeMap<usize, Partition>,
    pub summary: Vec<PartitionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl SplitAssignment {
    pub fn partition_of(&self, cluster_id: usize) -> Option<Partition> {
        self.assignment.get(&cluster_id).copied()
    }
}

/// Greedy proportional assignment of whole clusters.
///
/// Clusters are shuffled with `seed`, then stably sorted by segment count,
/// largest first; each goes to the partition with the largest remaining
/// deficit `ratio·total − assigned`, ties to the earlier partition. When
/// no cluster holds any segment, patch counts are balanced instead.
pub fn assign_partitions(clusters: &[RegionCluster], ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::Parameter(format!("ratios must be non-negative and sum to 1, got {ratios:?}")));
    }
    let by_segments = clusters.iter().any(|c| c.segments > 0);
    let weight = |c: &RegionCluster| if by_segments { c.segments } else { c.members.len() };
    let total: usize = clusters.iter().map(weight).sum();

    let warning = match clusters.len() {
        0 => None,
        1 => Some("only one cluster: everything assigned to train".to_string()),
        2 => Some("fewer than three clusters: some partitions will be empty".to_string()),
        _ => None,
    };
    if let Some(w) = &warning {
        warn!("{w}");
    }

    let mut order: Vec<&RegionCluster> = clusters.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|c| std::cmp::Reverse(weight(c)));

    let mut assigned = [0usize; 3];
    let mut assignment = BTreeMap::new();
    for c in order {
        let k = if clusters.len() == 1 {
            0
        } else {
            let deficit = |k: usize| ratios[k] * total as f64 - assigned[k] as f64;
            (0..3).fold(0, |best, k| if deficit(k) > deficit(best) { k } else { best })
        };
        assigned[k] += weight(c);
        assignment.insert(c.cluster_id, Partition::ALL[k]);
    }

    let all_segments: usize = clusters.iter().map(|c| c.segments).sum();
    let summary = Partition::ALL
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let members: Vec<&RegionCluster> = clusters.iter().filter(|c| assignment[&c.cluster_id] == p).collect();
            let segments: usize = members.iter().map(|c| c.segments).sum();
            PartitionSummary {
                partition: p,
                target_fraction: ratios[k],
                clusters: members.len(),
                patches: members.iter().map(|c| c.members.len()).sum(),
                segments,
                segment_fraction: if all_segments == 0 { 0.0 } else { segments as f64 / all_segments as f64 },
            }
        })
        .collect();
    Ok(SplitAssignment { seed, ratios, assignment, summary, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{ChannelRole, GeoTransform};

    #[test]
    fn origins() {
        assert_eq!(patch_origins(512, 256, 0.5, false).unwrap(), vec![0, 128, 256]);
        assert_eq!(patch_origins(256, 256, 0.5, false).unwrap(), vec![0]);
        assert_eq!(patch_origins(300, 256, 0.5, false).unwrap(), vec![0, 44]);
        assert_eq!(patch_origins(300, 256, 0.5, true).unwrap(), vec![0, 128]);
        assert_eq!(patch_origins(100, 256, 0.5, true).unwrap(), vec![0]);
        assert!(matches!(patch_origins(100, 256, 0.5, false), Err(Error::Dimension(_))));
        assert!(patch_origins(512, 256, 1.0, false).is_err());
        assert_eq!(patch_origins(10, 4, 0.0, false).unwrap(), vec![0, 4, 6]);
    }

    #[test]
    fn patches_carry_geotransform() {
        let geo = GeoTransform::new(1000.0, 2000.0, 0.5, 0.5).unwrap();
        let img = MultiChannelRaster::new(300, 300, 1, (0..90000).map(|i| i as f32).collect(), geo, vec![ChannelRole::ImageBand])
            .unwrap();
        let ps = extract_patches(&img, 256, 0.5, false).unwrap();
        assert_eq!(ps.len(), 4);
        let last = &ps[3];
        assert_eq!((last.row0, last.col0), (44, 44));
        assert_eq!(last.raster.geo.origin_x, 1022.0);
        assert_eq!(last.raster.geo.origin_y, 1978.0);
        assert_eq!(last.raster.value(0, 0, 0), img.value(44, 44, 0));
        assert_eq!(last.raster.value(255, 255, 0), img.value(299, 299, 0));
    }

    fn info(id: usize, x: f64, y: f64) -> PatchInfo {
        PatchInfo { id, centroid: [x, y], segments: 1 }
    }

    #[test]
    fn clustering_by_bin_adjacency() {
        let one = bin_and_cluster(&[info(0, 10.0, 10.0), info(1, 20.0, 90.0)], 100.0).unwrap();
        assert_eq!(one.len(), 1);
        let two = bin_and_cluster(&[info(0, 10.0, 10.0), info(1, 210.0, 10.0)], 100.0).unwrap();
        assert_eq!(two.len(), 2);
        let diag = bin_and_cluster(&[info(0, 10.0, 10.0), info(1, 110.0, -10.0)], 100.0).unwrap();
        assert_eq!(diag.len(), 1);
        assert_eq!(diag[0].bins, vec![(0, 0), (1, -1)]);
        assert_eq!(diag[0].segments, 2);
    }

    fn cluster(id: usize, segments: usize) -> RegionCluster {
        RegionCluster { cluster_id: id, members: vec![id], bins: vec![(id as i64, 0)], segments }
    }

    #[test]
    fn equal_clusters_split_by_count() {
        let cs: Vec<_> = (0..10).map(|i| cluster(i, 5)).collect();
        let s = assign_partitions(&cs, DEFAULT_RATIOS, 9).unwrap();
        let counts: Vec<usize> = s.summary.iter().map(|p| p.clusters).collect();
        assert_eq!(counts, vec![7, 2, 1]);
        assert_eq!(s, assign_partitions(&cs, DEFAULT_RATIOS, 9).unwrap());
    }

    #[test]
    fn uneven_clusters_near_targets() {
        let cs: Vec<_> = [50, 20, 10, 10, 5, 5].iter().enumerate().map(|(i, &n)| cluster(i, n)).collect();
        let s = assign_partitions(&cs, DEFAULT_RATIOS, 0).unwrap();
        // 50, 20 → train; 10, 10 → validation; 5, 5 → test
        let f: Vec<f64> = s.summary.iter().map(|p| p.segment_fraction).collect();
        assert_eq!(f, vec![0.7, 0.2, 0.1]);
    }

    #[test]
    fn single_cluster_all_train() {
        let s = assign_partitions(&[cluster(0, 3)], DEFAULT_RATIOS, 0).unwrap();
        assert_eq!(s.partition_of(0), Some(Partition::Train));
        assert!(s.warning.is_some());
    }
}
