use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context as _, Result};
use deadwood::ablation::{run_ablation, SceneMetric};
use deadwood::grid::Grid;
use deadwood::losses::{total_loss_maps, LossWeights};
use deadwood::metrics::{evaluate as evaluate_pairs, Aggregate, EvalConfig};
use deadwood::postprocess::{run_pipeline, PipelineConfig, StagePreset};
use deadwood::raster::{AnnotationCollection, GeoTransform, InstanceMap, MultiChannelRaster};
use deadwood::splitter::{assign_partitions, bin_and_cluster, patch_origins, Partition, PatchInfo};
use deadwood::synth::{seed_sweep, write_corpus, CorpusManifest, SceneSpec, MANIFEST_FILE};
use deadwood::targets::{build_target_stack, rasterize_polygons};
use deadwood::write_raster;
use log::warn;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::meta::{write_file, write_json, Context};
use crate::render::render_labels;
use crate::{AblateArgs, EvaluateArgs, LossEvalArgs, PostprocessArgs, RenderArgs, SplitArgs, SynthArgs, TargetsArgs};

fn rasterize(anns: &AnnotationCollection, geo: GeoTransform, shape: (usize, usize)) -> Result<InstanceMap> {
    let polygons: Vec<Vec<[f64; 2]>> = anns.annotations.iter().map(|a| a.polygon.clone()).collect();
    let r = rasterize_polygons(&polygons, geo, shape)?;
    if !r.dropped.is_empty() {
        warn!("{} annotation(s) fall outside the raster and were dropped", r.dropped.len());
    }
    Ok(r.map)
}

fn is_geojson(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("geojson") || e.eq_ignore_ascii_case("json"))
}

pub fn targets(ctx: &Context, a: &TargetsArgs) -> Result<()> {
    let anns = ctx.read_annotations("annotations", &a.annotations)?;
    let (geo, shape) = match &a.like {
        Some(p) => {
            let r = ctx.read_raster("reference raster", p)?;
            (r.geo, (r.height(), r.width()))
        }
        None => {
            let geo = GeoTransform::new(a.origin[0], a.origin[1], a.pixel_size, a.pixel_size)?;
            (geo, (a.height.unwrap_or(0), a.width.unwrap_or(0)))
        }
    };
    ctx.lap("read");
    let stack = build_target_stack(&anns.annotations, geo, shape, a.sigma)?;
    if !stack.dropped.is_empty() {
        warn!("{} annotation(s) fall outside the raster and were dropped", stack.dropped.len());
    }
    let violations = stack.invariant_violations();
    ctx.lap("targets");
    write_raster(&stack.to_raster()?, &a.out)?;
    if let Some(p) = &a.out_instances {
        write_raster(&stack.instances.to_raster()?, p)?;
    }
    if let Some(p) = &a.report {
        let config = json!({ "shape": [shape.0, shape.1], "geotransform": geo.to_signed_array(), "sigma": a.sigma });
        write_json(
            p,
            &json!({
                "metadata": ctx.metadata(config)?,
                "annotations": anns.annotations.len(),
                "instances": stack.instances.instance_count(),
                "dropped": stack.dropped,
                "invariant_violations": violations,
            }),
        )?;
    }
    ensure!(violations.is_empty(), "target invariants broken: {}", violations.join("; "));
    println!(
        "{} annotations -> {} instances ({} dropped), {}x{} px",
        anns.annotations.len(),
        stack.instances.instance_count(),
        stack.dropped.len(),
        shape.1,
        shape.0
    );
    Ok(())
}

fn f64_channels(r: &MultiChannelRaster) -> Result<Vec<Grid<f64>>> {
    Ok((0..r.channels()).map(|k| r.channel(k).map(|g| g.to_f64())).collect::<Result<_, _>>()?)
}

pub fn loss_eval(ctx: &Context, a: &LossEvalArgs) -> Result<()> {
    let pred = ctx.read_raster("prediction", &a.pred)?;
    let tgt = ctx.read_raster("targets", &a.targets)?;
    let weights: LossWeights = ctx.read_config("loss config", a.config.as_ref())?;
    ensure!(pred.channels() == 3 && tgt.channels() == 3, "prediction and targets need 3 channels each");
    let mut p = f64_channels(&pred)?;
    if a.probabilities {
        p[0] = p[0].map(|&v| {
            let q = v.clamp(1e-7, 1.0 - 1e-7);
            (q / (1.0 - q)).ln()
        });
    }
    let t = f64_channels(&tgt)?;
    let loss = total_loss_maps(&p, [&t[0], &t[1], &t[2]], &weights)?;
    ctx.lap("loss");

    let mut csv = String::from("component,value\n");
    for (name, v) in loss.components.named() {
        let _ = writeln!(csv, "{name},{v}");
    }
    let _ = writeln!(csv, "total,{}", loss.total);
    print!("{csv}");
    if let Some(p) = &a.out {
        write_file(p, csv.as_bytes())?;
    }
    if let Some(p) = &a.report {
        let config = json!({ "weights": weights, "probabilities": a.probabilities });
        write_json(p, &json!({ "metadata": ctx.metadata(config)?, "components": loss.components, "total": loss.total }))?;
    }
    Ok(())
}

pub fn postprocess(ctx: &Context, a: &PostprocessArgs) -> Result<()> {
    let pred = ctx.read_raster("prediction", &a.pred)?;
    let mut cfg: PipelineConfig = ctx.read_config("pipeline config", a.config.as_ref())?;
    if let Some(p) = a.stages {
        cfg = cfg.with_preset(p);
    }
    if let Some(v) = a.seg_threshold {
        cfg.seg_threshold = v;
    }
    if let Some(v) = a.min_area {
        cfg.min_area = v;
    }
    if let Some(v) = a.peak_min_distance {
        cfg.peak_min_distance = v;
    }
    if let Some(v) = a.smooth_sigma {
        cfg.smooth_sigma = v;
    }
    if let Some(v) = a.tile_size {
        cfg.tile_size = v;
    }
    cfg.validate()?;
    ctx.lap("read");
    let out = run_pipeline(&pred, &cfg)?;
    for (stage, secs) in &out.timings {
        ctx.push_timing(stage, *secs);
    }
    write_raster(&out.instances.to_raster()?, &a.out_labels)?;
    let mut foreign = Map::new();
    foreign.insert("metadata".into(), serde_json::to_value(ctx.metadata(&cfg)?)?);
    foreign.insert(
        "summary".into(),
        json!({
            "instances": out.vectors.len(),
            "markers": out.markers.len(),
            "discarded_markers": out.discarded_markers,
        }),
    );
    write_json(&a.out_geojson, &out.vectors.to_geojson(a.crs_epsg, foreign))?;
    println!("{} instances", out.vectors.len());
    Ok(())
}

fn aggregate_rows(pooled: &Aggregate, macro_avg: &Aggregate) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut s = String::from("metric,pooled,macro\n");
    let _ = writeln!(s, "pixel_iou,{},{}", pooled.pixel_iou, macro_avg.pixel_iou);
    let _ = writeln!(s, "tree_iou,{},{}", opt(pooled.tree_iou), opt(macro_avg.tree_iou));
    let _ = writeln!(s, "centroid_rmse_px,{},{}", opt(pooled.centroid_rmse_px), opt(macro_avg.centroid_rmse_px));
    let _ = writeln!(s, "precision,{},{}", pooled.precision, macro_avg.precision);
    let _ = writeln!(s, "recall,{},{}", pooled.recall, macro_avg.recall);
    let _ = writeln!(s, "f1,{},{}", pooled.f1, macro_avg.f1);
    s
}

pub fn evaluate(ctx: &Context, a: &EvaluateArgs) -> Result<()> {
    let pred = InstanceMap::from_raster(&ctx.read_raster("predicted labels", &a.pred_labels)?)?;
    let gt = if is_geojson(&a.gt) {
        let anns = ctx.read_annotations("ground truth", &a.gt)?;
        rasterize(&anns, pred.geo, (pred.height(), pred.width()))?
    } else {
        InstanceMap::from_raster(&ctx.read_raster("ground truth", &a.gt)?)?
    };
    let mut cfg: EvalConfig = ctx.read_config("eval config", a.config.as_ref())?;
    if let Some(t) = a.iou_threshold {
        cfg.iou_threshold = t;
    }
    ctx.lap("read");
    let report = evaluate_pairs(&[(pred, gt)], &cfg)?;
    ctx.lap("evaluate");
    write_json(&a.report, &json!({ "metadata": ctx.metadata(cfg)?, "report": report }))?;
    let mut csv = aggregate_rows(&report.pooled, &report.macro_avg);
    let _ = writeln!(csv, "tp,{0},{0}\nfp,{1},{1}\nfn,{2},{2}", report.tp, report.fp, report.fn_);
    if let Some(p) = &a.csv {
        write_file(p, csv.as_bytes())?;
    }
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!(
        "tree IoU {}  centroid RMSE {} px  P {:.4}  R {:.4}  F1 {:.4}  (TP {} FP {} FN {})",
        fmt(report.pooled.tree_iou),
        fmt(report.pooled.centroid_rmse_px),
        report.pooled.precision,
        report.pooled.recall,
        report.pooled.f1,
        report.tp,
        report.fp,
        report.fn_
    );
    Ok(())
}

/// Image paths from a JSON array, `{"images": [...]}`, or a synth manifest.
fn image_list(ctx: &Context, path: &Path) -> Result<Vec<PathBuf>> {
    let v: Value = ctx.read_json("image manifest", path)?;
    let names: Vec<String> = match &v {
        Value::Array(_) => serde_json::from_value(v)?,
        Value::Object(o) if o.contains_key("images") => serde_json::from_value(o["images"].clone())?,
        Value::Object(o) if o.contains_key("scenes") => {
            serde_json::from_value::<CorpusManifest>(v.clone())?.scenes.into_iter().map(|e| e.prediction).collect()
        }
        _ => bail!("image manifest must be a list of paths, {{\"images\": [...]}} or a corpus manifest"),
    };
    let dir = path.parent().unwrap_or(Path::new(""));
    Ok(names.into_iter().map(|n| dir.join(n)).collect())
}

#[derive(Serialize)]
struct PatchRecord {
    id: usize,
    image: String,
    row0: usize,
    col0: usize,
    centroid: [f64; 2],
    segments: usize,
    cluster: usize,
    partition: Partition,
}

pub fn split(ctx: &Context, a: &SplitArgs) -> Result<()> {
    let ratios = a.ratios;
    let anns = ctx.read_annotations("annotations", &a.annotations)?;
    let images = image_list(ctx, &a.images)?;
    let mut infos = Vec::new();
    let mut where_from = Vec::new();
    for path in &images {
        let r = ctx.read_raster("image", path)?;
        let rows = patch_origins(r.height(), a.patch_size, a.overlap, a.pad)?;
        let cols = patch_origins(r.width(), a.patch_size, a.overlap, a.pad)?;
        for &r0 in &rows {
            for &c0 in &cols {
                let geo = r.geo.offset(r0, c0);
                let size = a.patch_size as f64;
                let (x0, x1) = (geo.origin_x, geo.origin_x + size * geo.pixel_size_x);
                let (y0, y1) = (geo.origin_y - size * geo.pixel_size_y, geo.origin_y);
                let segments = anns
                    .annotations
                    .iter()
                    .filter(|an| an.centroid[0] >= x0 && an.centroid[0] < x1 && an.centroid[1] > y0 && an.centroid[1] <= y1)
                    .count();
                let half = (size - 1.0) / 2.0;
                infos.push(PatchInfo { id: infos.len(), centroid: geo.pixel_to_map(half, half), segments });
                where_from.push((path.display().to_string(), r0, c0));
            }
        }
    }
    ctx.lap("patches");
    let clusters = bin_and_cluster(&infos, a.bin_size)?;
    let split = assign_partitions(&clusters, ratios, a.seed)?;
    ctx.lap("assign");

    let mut cluster_of = vec![0usize; infos.len()];
    for c in &clusters {
        for &m in &c.members {
            cluster_of[m] = c.cluster_id;
        }
    }
    let patches: Vec<PatchRecord> = infos
        .iter()
        .zip(where_from)
        .map(|(p, (image, row0, col0))| PatchRecord {
            id: p.id,
            image,
            row0,
            col0,
            centroid: p.centroid,
            segments: p.segments,
            cluster: cluster_of[p.id],
            partition: split.assignment[&cluster_of[p.id]],
        })
        .collect();
    let cluster_json: Vec<Value> = clusters
        .iter()
        .map(|c| {
            json!({
                "cluster_id": c.cluster_id,
                "partition": split.assignment[&c.cluster_id],
                "members": c.members,
                "bins": c.bins,
                "segments": c.segments,
            })
        })
        .collect();
    let config = json!({
        "bin_size": a.bin_size,
        "ratios": ratios,
        "seed": a.seed,
        "patch_size": a.patch_size,
        "overlap": a.overlap,
        "pad": a.pad,
    });
    write_json(
        &a.out,
        &json!({
            "metadata": ctx.metadata(config)?,
            "summary": split.summary,
            "warning": split.warning,
            "clusters": cluster_json,
            "patches": patches,
        }),
    )?;
    println!("{} patches in {} clusters", patches.len(), clusters.len());
    for s in &split.summary {
        println!(
            "{:<10} clusters {:>4}  patches {:>6}  segments {:>6}  fraction {:.3} (target {:.3})",
            format!("{:?}", s.partition).to_lowercase(),
            s.clusters,
            s.patches,
            s.segments,
            s.segment_fraction,
            s.target_fraction
        );
    }
    Ok(())
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> Result<()> {
    let v: Value = ctx.read_json("scene spec", &a.spec)?;
    let specs: Vec<SceneSpec> = if v.is_array() {
        serde_json::from_value(v).context("invalid scene spec list")?
    } else {
        seed_sweep(&serde_json::from_value(v).context("invalid scene spec")?, a.scenes)
    };
    for s in &specs {
        s.validate()?;
    }
    let manifest = write_corpus(&specs, &a.out_dir)?;
    ctx.lap("generate");
    let mut out = serde_json::to_value(&manifest)?;
    out["metadata"] = serde_json::to_value(ctx.metadata(&specs)?)?;
    write_json(&a.out_dir.join(MANIFEST_FILE), &out)?;
    let crowns: usize = manifest.scenes.iter().map(|e| e.crowns).sum();
    println!("{} scenes, {} crowns -> {}", manifest.scenes.len(), crowns, a.out_dir.display());
    Ok(())
}

pub fn render(ctx: &Context, a: &RenderArgs) -> Result<()> {
    ensure!((0.0..=1.0).contains(&a.alpha), "--alpha must be in [0, 1], got {}", a.alpha);
    let labels = InstanceMap::from_raster(&ctx.read_raster("labels", &a.labels)?)?;
    let base = match &a.base {
        Some(p) => {
            let r = ctx.read_raster("base image", p)?;
            ensure!(
                r.width() == labels.width() && r.height() == labels.height(),
                "base is {}x{} but labels are {}x{}",
                r.width(),
                r.height(),
                labels.width(),
                labels.height()
            );
            Some(r.channel(a.band)?)
        }
        None => None,
    };
    let img = render_labels(&labels, base.as_ref(), a.alpha);
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)?;
    write_file(&a.out, &png)?;
    println!("{} instances -> {}", labels.instance_count(), a.out.display());
    Ok(())
}

pub fn ablate(ctx: &Context, a: &AblateArgs) -> Result<()> {
    let manifest: CorpusManifest = ctx.read_json("corpus manifest", &a.corpus)?;
    ensure!(!manifest.scenes.is_empty(), "corpus {} has no scenes", a.corpus.display());
    let pipeline: PipelineConfig = ctx.read_config("pipeline config", a.config.as_ref())?;
    let eval: EvalConfig = ctx.read_config("eval config", a.eval_config.as_ref())?;
    let dir = a.corpus.parent().unwrap_or(Path::new(""));
    let mut scenes = Vec::with_capacity(manifest.scenes.len());
    for e in &manifest.scenes {
        let pred = ctx.read_raster("prediction", &dir.join(&e.prediction))?;
        let anns = ctx.read_annotations("annotations", &dir.join(&e.annotations))?;
        let gt = rasterize(&anns, pred.geo, (pred.height(), pred.width()))?;
        scenes.push((pred, gt));
    }
    ctx.lap("read");
    let report = run_ablation(&scenes, &StagePreset::ALL, &pipeline, &eval)?;
    ctx.lap("ablation");
    print!("{}", report.table());

    let mut comparisons = Vec::new();
    for metric in [SceneMetric::TreeIou, SceneMetric::CentroidRmse] {
        match report.compare(StagePreset::Final, StagePreset::Raw, metric, a.n_boot, a.seed) {
            Ok(sig) => {
                println!(
                    "final vs raw {:?}: diff {:+.4} [{:+.4}, {:+.4}], p = {:.3e}",
                    metric, sig.mean_diff, sig.ci_diff.0, sig.ci_diff.1, sig.p_value
                );
                comparisons.push(json!({ "a": "final", "b": "raw", "metric": metric, "significance": sig }));
            }
            Err(e) => warn!("no {metric:?} comparison: {e}"),
        }
    }
    if let Some(p) = &a.csv {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let mut csv = String::from("preset,title,pixel_iou,tree_iou,centroid_rmse_px,precision,recall,f1\n");
        for r in &report.rows {
            let m = &r.macro_avg;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                r.preset.name(),
                r.title,
                m.pixel_iou,
                opt(m.tree_iou),
                opt(m.centroid_rmse_px),
                m.precision,
                m.recall,
                m.f1
            );
        }
        write_file(p, csv.as_bytes())?;
    }
    if let Some(p) = &a.report {
        let config = json!({ "pipeline": pipeline, "eval": eval, "n_boot": a.n_boot, "seed": a.seed });
        let mut by_preset = BTreeMap::new();
        for r in &report.rows {
            by_preset.insert(r.preset.name(), r.macro_avg.tree_iou);
        }
        write_json(
            p,
            &json!({
                "metadata": ctx.metadata(config)?,
                "ablation": report,
                "tree_iou_by_preset": by_preset,
                "comparisons": comparisons,
            }),
        )?;
    }
    Ok(())
}
