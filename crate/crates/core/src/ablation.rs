//! Runs each stage preset over a set of scenes and tabulates the metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, compactness_stats, evaluate_image, paired_significance, Aggregate, CompactnessStats, EvalConfig, ImageEval,
    Significance,
};
use crate::par;
use crate::postprocess::{run_pipeline, PipelineConfig, StagePreset};
use crate::raster::{InstanceMap, MultiChannelRaster};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub preset: StagePreset,
    pub title: String,
    pub pooled: Aggregate,
    pub macro_avg: Aggregate,
    pub per_scene: Vec<ImageEval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compactness: Option<CompactnessStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub pipeline: PipelineConfig,
    pub eval: EvalConfig,
    pub scenes: usize,
    pub rows: Vec<AblationRow>,
}

/// Per-scene metric used for paired comparisons between rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneMetric {
    TreeIou,
    CentroidRmse,
    PixelIou,
    F1,
}

impl SceneMetric {
    pub fn of(self, e: &ImageEval) -> Option<f64> {
        match self {
            SceneMetric::TreeIou => e.tree_iou,
            SceneMetric::CentroidRmse => e.centroid_rmse_px,
            SceneMetric::PixelIou => Some(e.pixel_iou),
            SceneMetric::F1 => Some(e.f1),
        }
    }
}

/// Evaluates every preset in `presets` on every (prediction, ground truth)
/// scene. Scenes are processed in parallel.
pub fn run_ablation(
    scenes: &[(MultiChannelRaster, InstanceMap)],
    presets: &[StagePreset],
    pipeline: &PipelineConfig,
    eval: &EvalConfig,
) -> Result<AblationReport> {
    let per_scene: Vec<Vec<(ImageEval, Option<CompactnessStats>)>> = par::map_slice(scenes, |(pred, gt)| {
        presets
            .iter()
            .map(|&p| {
                let out = run_pipeline(pred, &pipeline.clone().with_preset(p))?;
                Ok((evaluate_image(&out.instances, gt, eval)?, compactness_stats(&out.vectors)))
            })
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let rows = presets
        .iter()
        .enumerate()
        .map(|(k, &preset)| {
            let evals: Vec<ImageEval> = per_scene.iter().map(|s| s[k].0.clone()).collect();
            let report = aggregate(evals, *eval);
            let shapes: Vec<CompactnessStats> = per_scene.iter().filter_map(|s| s[k].1).collect();
            AblationRow {
                preset,
                title: preset.title().to_string(),
                pooled: report.pooled,
                macro_avg: report.macro_avg,
                per_scene: report.per_image,
                compactness: pool_compactness(&shapes),
            }
        })
        .collect();
    Ok(AblationReport { pipeline: pipeline.clone(), eval: *eval, scenes: scenes.len(), rows })
}

fn pool_compactness(stats: &[CompactnessStats]) -> Option<CompactnessStats> {
    let count: usize = stats.iter().map(|s| s.count).sum();
    if count == 0 {
        return None;
    }
    let mean = stats.iter().map(|s| s.mean * s.count as f64).sum::<f64>() / count as f64;
    let min = stats.iter().map(|s| s.min).fold(f64::INFINITY, f64::min);
    let max = stats.iter().map(|s| s.max).fold(f64::NEG_INFINITY, f64::max);
    // the median of medians stands in for the pooled median
    let mut meds: Vec<f64> = stats.iter().map(|s| s.median).collect();
    meds.sort_by(f64::total_cmp);
    Some(CompactnessStats { count, mean, median: meds[meds.len() / 2], min, max })
}

impl AblationReport {
    pub fn row(&self, preset: StagePreset) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.preset == preset)
    }

    /// Per-scene values of `metric` for two presets, keeping scenes where
    /// both are defined.
    pub fn paired(&self, a: StagePreset, b: StagePreset, metric: SceneMetric) -> Result<(Vec<f64>, Vec<f64>)> {
        let (ra, rb) = match (self.row(a), self.row(b)) {
            (Some(ra), Some(rb)) => (ra, rb),
            _ => return Err(Error::Parameter(format!("presets {} and {} must both be in the report", a.name(), b.name()))),
        };
        Ok(ra.per_scene.iter().zip(&rb.per_scene).filter_map(|(x, y)| Some((metric.of(x)?, metric.of(y)?))).unzip())
    }

    pub fn compare(&self, a: StagePreset, b: StagePreset, metric: SceneMetric, n_boot: usize, seed: u64) -> Result<Significance> {
        let (xa, xb) = self.paired(a, b, metric)?;
        paired_significance(&xa, &xb, n_boot, seed)
    }

    /// Plain-text table, one row per preset, using macro (per-scene mean)
    /// values.
    pub fn table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<24} {:>9} {:>9} {:>11} {:>9} {:>9} {:>9}",
            "Configuration", "PixelIoU", "TreeIoU", "CentErr(px)", "Precision", "Recall", "F1"
        );
        for r in &self.rows {
            let m = &r.macro_avg;
            let _ = writeln!(
                s,
                "{:<24} {:>9.4} {:>9} {:>11} {:>9.4} {:>9.4} {:>9.4}",
                r.title,
                m.pixel_iou,
                fmt(m.tree_iou),
                fmt(m.centroid_rmse_px),
                m.precision,
                m.recall,
                m.f1
            );
        }
        s
    }
}
