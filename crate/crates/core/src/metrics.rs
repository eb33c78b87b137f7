//! Pixel- and instance-level evaluation, compactness statistics and a paired
//! significance test for comparing configurations across repeated runs.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::par;
use crate::raster::{InstanceMap, InstanceSet};

pub use crate::geometry::compactness;

/// `|P ∩ G| / |P ∪ G|`; two empty masks agree perfectly.
pub fn pixel_iou(pred: &Mask, gt: &Mask) -> Result<f64> {
    pred.check_shape(gt, "pixel_iou")?;
    let (inter, union) = overlap_counts(pred, gt);
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

fn overlap_counts(pred: &Mask, gt: &Mask) -> (usize, usize) {
    pred.as_slice().iter().zip(gt.as_slice()).fold((0, 0), |(i, u), (&p, &g)| (i + usize::from(p && g), u + usize::from(p || g)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred_id: u32,
    pub gt_id: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Sorted by `pred_id`.
    pub pairs: Vec<MatchedPair>,
    pub unmatched_pred: Vec<u32>,
    pub unmatched_gt: Vec<u32>,
    pub iou_threshold: f64,
}

impl MatchResult {
    pub fn tp(&self) -> usize {
        self.pairs.len()
    }

    pub fn fp(&self) -> usize {
        self.unmatched_pred.len()
    }

    pub fn fn_(&self) -> usize {
        self.unmatched_gt.len()
    }

    pub fn total_iou(&self) -> f64 {
        self.pairs.iter().map(|p| p.iou).sum()
    }
}

/// IoU of every overlapping (pred, gt) label pair.
pub fn pairwise_iou(pred: &InstanceMap, gt: &InstanceMap) -> Result<Vec<MatchedPair>> {
    pred.labels.check_shape(&gt.labels, "match_instances")?;
    let pa = pred.pixel_counts();
    let ga = gt.pixel_counts();
    let mut inter: HashMap<(u32, u32), usize> = HashMap::new();
    for (&p, &g) in pred.labels.as_slice().iter().zip(gt.labels.as_slice()) {
        if p > 0 && g > 0 {
            *inter.entry((p, g)).or_default() += 1;
        }
    }
    let mut out: Vec<MatchedPair> = inter
        .into_iter()
        .map(|((p, g), i)| MatchedPair { pred_id: p, gt_id: g, iou: i as f64 / (pa[p as usize] + ga[g as usize] - i) as f64 })
        .collect();
    out.sort_by_key(|m| (m.pred_id, m.gt_id));
    Ok(out)
}

/// One-to-one matching maximising the summed IoU over pairs with
/// `iou >= iou_threshold`.
///
/// The candidate graph is split into connected components and each is solved
/// with the Hungarian method; rows and columns are ordered by id so the
/// result is deterministic.
pub fn match_instances(pred: &InstanceMap, gt: &InstanceMap, iou_threshold: f64) -> Result<MatchResult> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::Parameter(format!("iou_threshold must be in (0, 1), got {iou_threshold}")));
    }
    let candidates: Vec<MatchedPair> = pairwise_iou(pred, gt)?.into_iter().filter(|m| m.iou >= iou_threshold).collect();
    let pred_ids = present_ids(pred);
    let gt_ids = present_ids(gt);
    let pairs = match_candidates(&candidates);
    let unmatched_pred = pred_ids.into_iter().filter(|id| !pairs.iter().any(|p| p.pred_id == *id)).collect();
    let unmatched_gt = gt_ids.into_iter().filter(|id| !pairs.iter().any(|p| p.gt_id == *id)).collect();
    Ok(MatchResult { pairs, unmatched_pred, unmatched_gt, iou_threshold })
}

fn present_ids(map: &InstanceMap) -> Vec<u32> {
    map.pixel_counts().iter().enumerate().skip(1).filter(|(_, &n)| n > 0).map(|(l, _)| l as u32).collect()
}

/// Maximum-weight bipartite matching over a sparse candidate list.
pub fn match_candidates(candidates: &[MatchedPair]) -> Vec<MatchedPair> {
    // union-find over "p<id>" and "g<id>" nodes to find components
    let mut node: HashMap<(bool, u32), usize> = HashMap::new();
    for m in candidates {
        for key in [(false, m.pred_id), (true, m.gt_id)] {
            let n = node.len();
            node.entry(key).or_insert(n);
        }
    }
    let mut parent: Vec<usize> = (0..node.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in candidates {
        let (a, b) = (find(&mut parent, node[&(false, m.pred_id)]), find(&mut parent, node[&(true, m.gt_id)]));
        parent[a.max(b)] = a.min(b);
    }
    let mut comps: HashMap<usize, Vec<MatchedPair>> = HashMap::new();
    for m in candidates {
        let root = find(&mut parent, node[&(false, m.pred_id)]);
        comps.entry(root).or_default().push(*m);
    }
    let mut out: Vec<MatchedPair> = comps.into_values().flat_map(|c| solve_component(&c)).collect();
    out.sort_by_key(|m| m.pred_id);
    out
}

fn solve_component(edges: &[MatchedPair]) -> Vec<MatchedPair> {
    if edges.len() == 1 {
        return edges.to_vec();
    }
    let mut preds: Vec<u32> = edges.iter().map(|e| e.pred_id).collect();
    let mut gts: Vec<u32> = edges.iter().map(|e| e.gt_id).collect();
    preds.sort_unstable();
    preds.dedup();
    gts.sort_unstable();
    gts.dedup();
    let transpose = preds.len() > gts.len();
    let (rows, cols) = if transpose { (&gts, &preds) } else { (&preds, &gts) };
    let mut weight = vec![vec![0.0; cols.len()]; rows.len()];
    let mut lookup = HashMap::new();
    for e in edges {
        let (r, c) = if transpose { (e.gt_id, e.pred_id) } else { (e.pred_id, e.gt_id) };
        let (ri, ci) = (rows.binary_search(&r).unwrap(), cols.binary_search(&c).unwrap());
        weight[ri][ci] = e.iou;
        lookup.insert((ri, ci), *e);
    }
    let cost: Vec<Vec<f64>> = weight.iter().map(|row| row.iter().map(|w| -w).collect()).collect();
    hungarian(&cost).into_iter().enumerate().filter_map(|(ri, ci)| lookup.get(&(ri, ci)).copied()).collect()
}

/// Minimum-cost assignment of every row to a distinct column (rows ≤ cols).
/// Returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols");
    // potentials, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0; n];
    for j in 1..=m {
        if p[j] > 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}

/// Summed matched IoU over the number of ground-truth instances. `None`
/// when there is no ground truth.
pub fn tree_iou(m: &MatchResult, gt_count: usize) -> Option<f64> {
    (gt_count > 0).then(|| m.total_iou() / gt_count as f64)
}

/// RMSE between matched centroids in pixels. Centroid slices are indexed by
/// label id. `None` without matches.
pub fn centroid_rmse(m: &MatchResult, pred_centroids: &[Option<[f64; 2]>], gt_centroids: &[Option<[f64; 2]>]) -> Option<f64> {
    let (sum, n) = centroid_sq_sum(m, pred_centroids, gt_centroids);
    (n > 0).then(|| (sum / n as f64).sqrt())
}

fn centroid_sq_sum(m: &MatchResult, pred: &[Option<[f64; 2]>], gt: &[Option<[f64; 2]>]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for pair in &m.pairs {
        let p = pred.get(pair.pred_id as usize).copied().flatten();
        let g = gt.get(pair.gt_id as usize).copied().flatten();
        if let (Some(p), Some(g)) = (p, g) {
            sum += (p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2);
            n += 1;
        }
    }
    (sum, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from detection counts. An empty prediction set
/// has precision 1, an empty ground truth has recall 1, and F1 is 0 when
/// both precision and recall are 0.
pub fn prf_from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        // equals 2PR/(P+R), without the intermediate rounding
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Prf { precision, recall, f1 }
}

pub fn instance_prf(m: &MatchResult) -> Prf {
    prf_from_counts(m.tp(), m.fp(), m.fn_())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactnessStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn compactness_stats(set: &InstanceSet) -> Option<CompactnessStats> {
    let mut v: Vec<f64> = set.instances.iter().map(|i| i.compactness).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    Some(CompactnessStats { count: n, mean: v.iter().sum::<f64>() / n as f64, median, min: v[0], max: v[n - 1] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// Two-sided paired permutation p-value for `mean(a - b) != 0`.
    pub p_value: f64,
    /// Whether all sign assignments were enumerated.
    pub exact: bool,
    pub mean_a: f64,
    pub mean_b: f64,
    pub ci_a: (f64, f64),
    pub ci_b: (f64, f64),
    /// Mean and 95% CI of the paired difference `a - b`.
    pub mean_diff: f64,
    pub ci_diff: (f64, f64),
}

/// Samples up to this length are tested by full sign-flip enumeration.
pub const EXACT_PERMUTATION_MAX_N: usize = 12;

/// Paired sign-flip permutation test plus percentile bootstrap 95% CIs.
pub fn paired_significance(a: &[f64], b: &[f64], n_boot: usize, seed: u64) -> Result<Significance> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Validation("paired test needs at least two pairs".into()));
    }
    if n_boot == 0 {
        return Err(Error::Parameter("n_boot must be positive".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation("paired samples must be finite".into()));
    }
    let n = a.len();
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = d.iter().sum::<f64>().abs();
    let scale = d.iter().map(|v| v.abs()).sum::<f64>();
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let exact = n <= EXACT_PERMUTATION_MAX_N;
    let p_value = if exact {
        let total = 1usize << n;
        let hits = (0..total)
            .filter(|mask| {
                let s: f64 = d.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { -v } else { *v }).sum();
                s.abs() >= observed - tol
            })
            .count();
        hits as f64 / total as f64
    } else {
        let hits = (0..n_boot)
            .filter(|_| {
                let s: f64 = d.iter().map(|v| if rng.random::<bool>() { -v } else { *v }).sum();
                s.abs() >= observed - tol
            })
            .count();
        (1 + hits) as f64 / (1 + n_boot) as f64
    };

    let mut ma = Vec::with_capacity(n_boot);
    let mut mb = Vec::with_capacity(n_boot);
    let mut md = Vec::with_capacity(n_boot);
    // deviations from the first element keep constant samples exact
    for _ in 0..n_boot {
        let (mut sa, mut sb, mut sd) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let i = rng.random_range(0..n);
            sa += a[i] - a[0];
            sb += b[i] - b[0];
            sd += d[i] - d[0];
        }
        ma.push(a[0] + sa / n as f64);
        mb.push(b[0] + sb / n as f64);
        md.push(d[0] + sd / n as f64);
    }
    let mean = |v: &[f64]| v[0] + v.iter().map(|x| x - v[0]).sum::<f64>() / v.len() as f64;
    Ok(Significance {
        p_value: p_value.min(1.0),
        exact,
        mean_a: mean(a),
        mean_b: mean(b),
        ci_a: percentile_ci(ma),
        ci_b: percentile_ci(mb),
        mean_diff: mean(&d),
        ci_diff: percentile_ci(md),
    })
}

fn percentile_ci(mut v: Vec<f64>) -> (f64, f64) {
    v.sort_by(f64::total_cmp);
    (quantile(&v, 0.025), quantile(&v, 0.975))
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    // equal neighbours give the exact value rather than a rounded blend
    if sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + t * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5 }
    }
}

/// Scores for one (prediction, ground truth) pair of label rasters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub pixel_iou: f64,
    pub tree_iou: Option<f64>,
    pub centroid_rmse_px: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_gt: usize,
    pub n_pred: usize,
    pub matched_iou_sum: f64,
    pub centroid_sq_sum: f64,
    pub pixel_intersection: usize,
    pub pixel_union: usize,
}

pub fn evaluate_image(pred: &InstanceMap, gt: &InstanceMap, cfg: &EvalConfig) -> Result<ImageEval> {
    let m = match_instances(pred, gt, cfg.iou_threshold)?;
    let (inter, union) = overlap_counts(&pred.mask(), &gt.mask());
    let pc = pred.centroids_px();
    let gc = gt.centroids_px();
    let (sq, n) = centroid_sq_sum(&m, &pc, &gc);
    let n_gt = m.tp() + m.fn_();
    let prf = instance_prf(&m);
    Ok(ImageEval {
        pixel_iou: if union == 0 { 1.0 } else { inter as f64 / union as f64 },
        tree_iou: tree_iou(&m, n_gt),
        centroid_rmse_px: (n > 0).then(|| (sq / n as f64).sqrt()),
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        tp: m.tp(),
        fp: m.fp(),
        fn_: m.fn_(),
        n_gt,
        n_pred: m.tp() + m.fp(),
        matched_iou_sum: m.total_iou(),
        centroid_sq_sum: sq,
        pixel_intersection: inter,
        pixel_union: union,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pixel_iou: f64,
    pub tree_iou: Option<f64>,
    pub centroid_rmse_px: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Counts and sums pooled over all images before forming ratios.
    pub pooled: Aggregate,
    /// Unweighted means of the per-image values that are defined.
    pub macro_avg: Aggregate,
    pub per_image: Vec<ImageEval>,
}

/// Evaluates each (prediction, ground truth) pair in parallel and aggregates.
pub fn evaluate(pairs: &[(InstanceMap, InstanceMap)], cfg: &EvalConfig) -> Result<EvalReport> {
    let per_image = par::map_slice(pairs, |(p, g)| evaluate_image(p, g, cfg)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok(aggregate(per_image, *cfg))
}

pub fn aggregate(per_image: Vec<ImageEval>, config: EvalConfig) -> EvalReport {
    let tp: usize = per_image.iter().map(|e| e.tp).sum();
    let fp: usize = per_image.iter().map(|e| e.fp).sum();
    let fn_: usize = per_image.iter().map(|e| e.fn_).sum();
    let inter: usize = per_image.iter().map(|e| e.pixel_intersection).sum();
    let union: usize = per_image.iter().map(|e| e.pixel_union).sum();
    let n_gt: usize = per_image.iter().map(|e| e.n_gt).sum();
    let iou_sum: f64 = per_image.iter().map(|e| e.matched_iou_sum).sum();
    let sq: f64 = per_image.iter().map(|e| e.centroid_sq_sum).sum();
    let prf = prf_from_counts(tp, fp, fn_);
    let pooled = Aggregate {
        pixel_iou: if union == 0 { 1.0 } else { inter as f64 / union as f64 },
        tree_iou: (n_gt > 0).then(|| iou_sum / n_gt as f64),
        centroid_rmse_px: (tp > 0).then(|| (sq / tp as f64).sqrt()),
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
    };
    let mean_of = |f: &dyn Fn(&ImageEval) -> Option<f64>| {
        let v: Vec<f64> = per_image.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let macro_avg = Aggregate {
        pixel_iou: mean_of(&|e| Some(e.pixel_iou)).unwrap_or(1.0),
        tree_iou: mean_of(&|e| e.tree_iou),
        centroid_rmse_px: mean_of(&|e| e.centroid_rmse_px),
        precision: mean_of(&|e| Some(e.precision)).unwrap_or(1.0),
        recall: mean_of(&|e| Some(e.recall)).unwrap_or(1.0),
        f1: mean_of(&|e| Some(e.f1)).unwrap_or(1.0),
    };
    EvalReport { config, tp, fp, fn_, pooled, macro_avg, per_image }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::raster::GeoTransform;

    fn imap(w: usize, h: usize, f: impl FnMut(usize, usize) -> u32) -> InstanceMap {
        InstanceMap::new(Grid::from_fn(w, h, f), GeoTransform::default())
    }

    #[test]
    fn pixel_iou_values() {
        let p = Grid::from_fn(3, 1, |_, c| c < 2);
        let g = Grid::from_fn(3, 1, |_, c| c > 0);
        assert_eq!(pixel_iou(&p, &g).unwrap(), 1.0 / 3.0);
        assert_eq!(pixel_iou(&p, &p).unwrap(), 1.0);
        let e = Grid::filled(3, 1, false);
        assert_eq!(pixel_iou(&e, &e).unwrap(), 1.0);
        assert_eq!(pixel_iou(&p, &p.map(|b| !b)).unwrap(), 0.0);
        assert!(matches!(pixel_iou(&p, &Grid::filled(2, 1, false)), Err(Error::Dimension(_))));
    }

    #[test]
    fn identical_maps_match_fully() {
        let m = imap(8, 8, |r, c| (r / 4 * 2 + c / 4) as u32 + 1);
        let res = match_instances(&m, &m, 0.5).unwrap();
        assert_eq!(res.tp(), 4);
        assert_eq!(res.fp() + res.fn_(), 0);
        assert!(res.pairs.iter().all(|p| p.iou == 1.0));
        assert_eq!(tree_iou(&res, 4), Some(1.0));
        let c = m.centroids_px();
        assert_eq!(centroid_rmse(&res, &c, &c), Some(0.0));
    }

    #[test]
    fn missed_gt_is_false_negative() {
        let gt = imap(4, 4, |r, _| u32::from(r < 2));
        let pred = imap(4, 4, |_, _| 0);
        let res = match_instances(&pred, &gt, 0.5).unwrap();
        assert_eq!((res.tp(), res.fp(), res.fn_()), (0, 0, 1));
        assert_eq!(tree_iou(&res, 0), None);
        assert_eq!(centroid_rmse(&res, &[], &[]), None);
    }

    #[test]
    fn tree_iou_counts_missed_as_zero() {
        let m = MatchResult {
            pairs: vec![MatchedPair { pred_id: 1, gt_id: 1, iou: 0.8 }],
            unmatched_pred: vec![],
            unmatched_gt: vec![2],
            iou_threshold: 0.5,
        };
        assert!((tree_iou(&m, 2).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rmse_values() {
        let one = MatchResult {
            pairs: vec![MatchedPair { pred_id: 1, gt_id: 1, iou: 1.0 }],
            unmatched_pred: vec![],
            unmatched_gt: vec![],
            iou_threshold: 0.5,
        };
        assert_eq!(centroid_rmse(&one, &[None, Some([3.0, 4.0])], &[None, Some([0.0, 0.0])]), Some(5.0));
        let two = MatchResult {
            pairs: vec![MatchedPair { pred_id: 1, gt_id: 1, iou: 1.0 }, MatchedPair { pred_id: 2, gt_id: 2, iou: 1.0 }],
            ..one
        };
        let r =
            centroid_rmse(&two, &[None, Some([1.0, 0.0]), Some([0.0, 2.0])], &[None, Some([0.0; 2]), Some([0.0; 2])]).unwrap();
        assert!((r - 2.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn prf_values() {
        assert_eq!(prf_from_counts(1, 0, 0), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(prf_from_counts(2, 1, 3), Prf { precision: 2.0 / 3.0, recall: 2.0 / 5.0, f1: 0.5 });
        assert_eq!(prf_from_counts(1, 1, 1).f1, 0.5);
        assert_eq!(prf_from_counts(0, 0, 0), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(prf_from_counts(0, 3, 0), Prf { precision: 0.0, recall: 1.0, f1: 0.0 });
        assert_eq!(prf_from_counts(0, 0, 2), Prf { precision: 1.0, recall: 0.0, f1: 0.0 });
        // f1 agrees with the harmonic mean away from the corners
        for (tp, fp, fn_) in [(3, 4, 5), (7, 1, 2), (1, 9, 1)] {
            let p = prf_from_counts(tp, fp, fn_);
            assert!((p.f1 - 2.0 * p.precision * p.recall / (p.precision + p.recall)).abs() < 1e-15);
        }
    }

    #[test]
    fn hungarian_beats_greedy() {
        // greedy takes (1,1)=0.9 and is left with 0.1; optimum is 0.8+0.8
        let c = vec![
            MatchedPair { pred_id: 1, gt_id: 1, iou: 0.9 },
            MatchedPair { pred_id: 1, gt_id: 2, iou: 0.8 },
            MatchedPair { pred_id: 2, gt_id: 1, iou: 0.8 },
            MatchedPair { pred_id: 2, gt_id: 2, iou: 0.1 },
        ];
        let m = match_candidates(&c);
        let total: f64 = m.iter().map(|p| p.iou).sum();
        assert!((total - 1.6).abs() < 1e-12);
    }

    #[test]
    fn significance_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let s = paired_significance(&a, &a, 500, 1).unwrap();
        assert_eq!(s.p_value, 1.0);
        let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        let s = paired_significance(&a, &b, 500, 1).unwrap();
        assert!(s.exact);
        assert_eq!(s.p_value, 2.0 / 32.0);
        let s2 = paired_significance(&b, &a, 500, 1).unwrap();
        assert_eq!(s2.p_value, s.p_value);
        let c = [0.7; 3];
        let s = paired_significance(&c, &[0.1, 0.2, 0.3], 500, 1).unwrap();
        assert_eq!(s.ci_a, (0.7, 0.7));
        assert!(paired_significance(&c, &[1.0], 10, 1).is_err());
    }

    #[test]
    fn sampled_permutation_for_long_series() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.1 + 1.0).collect();
        let b: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let s = paired_significance(&a, &b, 999, 4).unwrap();
        assert!(!s.exact);
        assert_eq!(s.p_value, 1.0 / 1000.0);
        assert_eq!(paired_significance(&a, &b, 999, 4).unwrap(), s);
    }

    #[test]
    fn pooled_and_macro_aggregates() {
        let gt = imap(10, 2, |r, c| if r == 0 { (c / 5 + 1) as u32 } else { 0 });
        let pred = imap(10, 2, |r, c| u32::from(r == 0 && c < 5));
        let empty = imap(10, 2, |_, _| 0);
        let rep = evaluate(&[(pred.clone(), gt.clone()), (empty.clone(), gt)], &EvalConfig::default()).unwrap();
        assert_eq!((rep.tp, rep.fp, rep.fn_), (1, 0, 3));
        assert_eq!(rep.pooled.recall, 0.25);
        assert_eq!(rep.macro_avg.recall, 0.25);
        assert_eq!(rep.pooled.tree_iou, Some(0.25));
        assert_eq!(rep.macro_avg.tree_iou, Some(0.25));
        assert_eq!(rep.pooled.precision, 1.0);
        assert_eq!(rep.pooled.centroid_rmse_px, Some(0.0));
        assert_eq!(rep.macro_avg.pixel_iou, 0.25);
        assert_eq!(rep.pooled.pixel_iou, 0.25);
    }
}
