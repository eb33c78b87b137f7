//! Multi-task training loss with analytic gradients.
//!
//! * segmentation: `BCE + λ_dice · (1 − Dice)` on logits, optionally with
//!   focal modulation of the BCE term,
//! * centroid: mean squared error of the heatmap,
//! * hybrid: `λ_sdt · SmoothL1` over non-boundary pixels plus
//!   `λ_boundary · L1` towards −1 over boundary pixels,
//! * total: `seg + λ_centroid · centroid + λ_hybrid · hybrid`.
//!
//! All reductions use fixed-order pairwise summation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::targets::TargetStack;

/// Additive smoothing in both Dice numerator and denominator.
pub const DICE_SMOOTH: f64 = 1.0;

/// Transition point of the Smooth-L1 loss.
pub const SMOOTH_L1_BETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_dice: f64,
    pub lambda_centroid: f64,
    pub lambda_hybrid: f64,
    pub lambda_sdt: f64,
    pub lambda_boundary: f64,
    pub bce_pos_weight: f64,
    /// Focal exponent; 0 disables focal modulation.
    pub focal_gamma: f64,
    /// Focal class balance, applied as α to positives and 1−α to negatives.
    pub focal_alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_dice: 1.0,
            lambda_centroid: 1.0,
            lambda_hybrid: 1.0,
            lambda_sdt: 1.0,
            lambda_boundary: 10.0,
            bce_pos_weight: 1.0,
            focal_gamma: 0.0,
            focal_alpha: 0.25,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("lambda_dice", self.lambda_dice),
            ("lambda_centroid", self.lambda_centroid),
            ("lambda_hybrid", self.lambda_hybrid),
            ("lambda_sdt", self.lambda_sdt),
            ("lambda_boundary", self.lambda_boundary),
            ("focal_gamma", self.focal_gamma),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.bce_pos_weight.is_finite() && self.bce_pos_weight > 0.0) {
            return Err(Error::Parameter(format!("bce_pos_weight must be > 0, got {}", self.bce_pos_weight)));
        }
        if !(0.0..=1.0).contains(&self.focal_alpha) {
            return Err(Error::Parameter(format!("focal_alpha must be in [0,1], got {}", self.focal_alpha)));
        }
        Ok(())
    }
}

/// Named scalar parts of a loss. Unused parts stay 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub bce: f64,
    pub focal: f64,
    /// `1 − Dice`.
    pub dice: f64,
    pub seg: f64,
    pub centroid: f64,
    pub sdt: f64,
    pub boundary: f64,
    pub hybrid: f64,
}

impl LossComponents {
    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("bce", self.bce),
            ("focal", self.focal),
            ("dice", self.dice),
            ("seg", self.seg),
            ("centroid", self.centroid),
            ("sdt", self.sdt),
            ("boundary", self.boundary),
            ("hybrid", self.hybrid),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub components: LossComponents,
    /// `∂total/∂prediction`, one grid per input channel.
    pub gradient: Vec<Grid<f64>>,
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_inputs(pred: &Grid<f64>, target: &Grid<f64>, what: &str) -> Result<()> {
    pred.check_shape(target, what)?;
    if pred.is_empty() {
        return Err(Error::Dimension(format!("{what}: empty input")));
    }
    Ok(())
}

/// Segmentation loss on logits against a {0,1} mask.
pub fn seg_loss(logits: &Grid<f64>, target: &Grid<f64>, w: &LossWeights) -> Result<LossValue> {
    check_inputs(logits, target, "seg_loss")?;
    w.validate()?;
    if let Some(v) = target.as_slice().iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::Validation(format!("segmentation target must be 0 or 1, got {v}")));
    }
    let n = logits.len() as f64;
    let focal = w.focal_gamma > 0.0;
    let xs = logits.as_slice();
    let ts = target.as_slice();

    let mut bce = Vec::with_capacity(xs.len());
    let mut focal_terms = Vec::with_capacity(if focal { xs.len() } else { 0 });
    let mut base_grad = Vec::with_capacity(xs.len());
    let probs: Vec<f64> = xs.iter().map(|&x| sigmoid(x)).collect();
    for (&x, &t) in xs.iter().zip(ts) {
        // s is the logit oriented so that CE = c · softplus(s)
        let (s, ds_dx, class_w, alpha) =
            if t == 1.0 { (-x, -1.0, w.bce_pos_weight, w.focal_alpha) } else { (x, 1.0, 1.0, 1.0 - w.focal_alpha) };
        let ce = class_w * softplus(s);
        bce.push(ce);
        if focal {
            // (1 − p_t) = σ(s)
            let q = sigmoid(s);
            let mod_ = q.powf(w.focal_gamma);
            focal_terms.push(alpha * mod_ * ce);
            let d_ds = alpha * class_w * (w.focal_gamma * mod_ * sigmoid(-s) * softplus(s) + mod_ * q);
            base_grad.push(d_ds * ds_dx / n);
        } else {
            base_grad.push(class_w * sigmoid(s) * ds_dx / n);
        }
    }
    let bce_mean = pairwise_sum(&bce) / n;
    let focal_mean = if focal { pairwise_sum(&focal_terms) / n } else { 0.0 };

    let pt: Vec<f64> = probs.iter().zip(ts).map(|(p, t)| p * t).collect();
    let inter = pairwise_sum(&pt);
    let denom = pairwise_sum(&probs) + pairwise_sum(ts) + DICE_SMOOTH;
    let numer = 2.0 * inter + DICE_SMOOTH;
    let dice_loss = 1.0 - numer / denom;

    let grad: Vec<f64> = base_grad
        .iter()
        .zip(probs.iter().zip(ts))
        .map(|(&g, (&p, &t))| {
            let d_dice_dp = (2.0 * t * denom - numer) / (denom * denom);
            g - w.lambda_dice * d_dice_dp * p * (1.0 - p)
        })
        .collect();

    let base = if focal { focal_mean } else { bce_mean };
    let seg = base + w.lambda_dice * dice_loss;
    Ok(LossValue {
        total: seg,
        components: LossComponents { bce: bce_mean, focal: focal_mean, dice: dice_loss, seg, ..Default::default() },
        gradient: vec![Grid::from_vec(logits.width(), logits.height(), grad)?],
    })
}

/// Mean squared error between predicted and target heatmaps.
pub fn centroid_loss(pred: &Grid<f64>, target: &Grid<f64>) -> Result<LossValue> {
    check_inputs(pred, target, "centroid_loss")?;
    let n = pred.len() as f64;
    let diff: Vec<f64> = pred.as_slice().iter().zip(target.as_slice()).map(|(p, y)| p - y).collect();
    let sq: Vec<f64> = diff.iter().map(|d| d * d).collect();
    let mse = pairwise_sum(&sq) / n;
    let grad = diff.iter().map(|d| 2.0 * d / n).collect();
    Ok(LossValue {
        total: mse,
        components: LossComponents { centroid: mse, ..Default::default() },
        gradient: vec![Grid::from_vec(pred.width(), pred.height(), grad)?],
    })
}

#[inline]
fn smooth_l1(r: f64) -> (f64, f64) {
    if r.abs() < SMOOTH_L1_BETA {
        (0.5 * r * r / SMOOTH_L1_BETA, r / SMOOTH_L1_BETA)
    } else {
        (r.abs() - 0.5 * SMOOTH_L1_BETA, r.signum())
    }
}

/// Hybrid map loss. Boundary pixels are those whose target is exactly −1.
pub fn hybrid_loss(pred: &Grid<f64>, target: &Grid<f64>, w: &LossWeights) -> Result<LossValue> {
    check_inputs(pred, target, "hybrid_loss")?;
    w.validate()?;
    if let Some(v) = target.as_slice().iter().find(|t| !(-1.0..=1.0).contains(*t)) {
        return Err(Error::Validation(format!("hybrid target {v} outside [-1, 1]")));
    }
    let nb = target.as_slice().iter().filter(|&&t| t == -1.0).count();
    let nn = target.len() - nb;
    let mut sdt_terms = Vec::with_capacity(nn);
    let mut boundary_terms = Vec::with_capacity(nb);
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.as_slice().iter().zip(target.as_slice()) {
        if t == -1.0 {
            let r = p + 1.0;
            boundary_terms.push(r.abs());
            grad.push(w.lambda_boundary * if r == 0.0 { 0.0 } else { r.signum() } / nb as f64);
        } else {
            let (v, d) = smooth_l1(p - t);
            sdt_terms.push(v);
            grad.push(w.lambda_sdt * d / nn as f64);
        }
    }
    let sdt = if nn > 0 { pairwise_sum(&sdt_terms) / nn as f64 } else { 0.0 };
    let boundary = if nb > 0 { pairwise_sum(&boundary_terms) / nb as f64 } else { 0.0 };
    let hybrid = w.lambda_sdt * sdt + w.lambda_boundary * boundary;
    Ok(LossValue {
        total: hybrid,
        components: LossComponents { sdt, boundary, hybrid, ..Default::default() },
        gradient: vec![Grid::from_vec(pred.width(), pred.height(), grad)?],
    })
}

/// Combined loss over a (segmentation logits, centroid, hybrid) prediction.
pub fn total_loss(pred: &[Grid<f64>], targets: &TargetStack, w: &LossWeights) -> Result<LossValue> {
    let mask = targets.mask.map(|&b| if b { 1.0 } else { 0.0 });
    total_loss_maps(pred, [&mask, &targets.centroid_heatmap.to_f64(), &targets.hybrid.to_f64()], w)
}

/// [`total_loss`] against target grids in (mask, centroid, hybrid) order.
pub fn total_loss_maps(pred: &[Grid<f64>], targets: [&Grid<f64>; 3], w: &LossWeights) -> Result<LossValue> {
    if pred.len() != 3 {
        return Err(Error::Dimension(format!("prediction stack needs 3 channels, got {}", pred.len())));
    }
    let seg = seg_loss(&pred[0], targets[0], w)?;
    let cen = centroid_loss(&pred[1], targets[1])?;
    let hyb = hybrid_loss(&pred[2], targets[2], w)?;
    let total = seg.total + w.lambda_centroid * cen.total + w.lambda_hybrid * hyb.total;
    let scale = |g: &Grid<f64>, k: f64| g.map(|v| v * k);
    Ok(LossValue {
        total,
        components: LossComponents {
            centroid: cen.components.centroid,
            sdt: hyb.components.sdt,
            boundary: hyb.components.boundary,
            hybrid: hyb.components.hybrid,
            ..seg.components
        },
        gradient: vec![
            seg.gradient[0].clone(),
            scale(&cen.gradient[0], w.lambda_centroid),
            scale(&hyb.gradient[0], w.lambda_hybrid),
        ],
    })
}
