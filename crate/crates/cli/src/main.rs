//! `deadwood` command-line tool.
//!
//! Exit status: 0 success, 1 validation error, 2 I/O error, 64 usage error.

mod commands;
mod meta;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deadwood::postprocess::StagePreset;

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "deadwood",
    version,
    about = "Dead-tree instance segmentation: targets, losses, postprocessing, evaluation and splits"
)]
struct Cli {
    /// Worker thread cap. Results do not depend on it.
    #[arg(long, global = true, env = "DEADWOOD_THREADS", value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,

    /// Leave stage timings out of JSON outputs so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timings: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rasterize annotations into the (mask, centroid, hybrid) target stack.
    Targets(TargetsArgs),
    /// Score a prediction stack against a target stack; prints CSV.
    LossEval(LossEvalArgs),
    /// Turn a prediction stack into labelled instances and polygons.
    Postprocess(PostprocessArgs),
    /// Compare predicted labels with ground truth.
    Evaluate(EvaluateArgs),
    /// Cut patches, cluster them spatially and assign partitions.
    Split(SplitArgs),
    /// Generate a synthetic corpus with known ground truth.
    Synth(SynthArgs),
    /// Draw labels as a colour PNG.
    Render(RenderArgs),
    /// Run the four stage presets over a corpus and print the metric table.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct TargetsArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Output 3-channel raster.
    #[arg(long)]
    pub out: PathBuf,
    /// Take size and georeference from this raster.
    #[arg(long, conflicts_with_all = ["width", "height"])]
    pub like: Option<PathBuf>,
    #[arg(long, required_unless_present = "like")]
    pub width: Option<usize>,
    #[arg(long, required_unless_present = "like")]
    pub height: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub pixel_size: f64,
    /// Map coordinates of the top-left corner, `x,y`.
    #[arg(long, value_parser = parse_floats::<2>, default_value = "0,0")]
    pub origin: [f64; 2],
    /// Heatmap Gaussian sigma in pixels.
    #[arg(long, default_value_t = deadwood::targets::DEFAULT_HEATMAP_SIGMA)]
    pub sigma: f64,
    /// Also write the instance label raster.
    #[arg(long)]
    pub out_instances: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossEvalArgs {
    /// Prediction stack: segmentation logits, centroid, hybrid.
    #[arg(long)]
    pub pred: PathBuf,
    /// Target stack as written by `targets`.
    #[arg(long)]
    pub targets: PathBuf,
    /// LossWeights JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Channel 0 holds probabilities; convert to logits first.
    #[arg(long)]
    pub probabilities: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// PipelineConfig JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_labels: PathBuf,
    #[arg(long)]
    pub out_geojson: PathBuf,
    #[arg(long, value_parser = parse_preset)]
    pub stages: Option<StagePreset>,
    #[arg(long)]
    pub seg_threshold: Option<f64>,
    #[arg(long)]
    pub min_area: Option<usize>,
    #[arg(long)]
    pub peak_min_distance: Option<f64>,
    #[arg(long)]
    pub smooth_sigma: Option<f64>,
    #[arg(long)]
    pub tile_size: Option<usize>,
    /// EPSG code written as the `crs_epsg` member.
    #[arg(long)]
    pub crs_epsg: Option<u32>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred_labels: PathBuf,
    /// Ground truth: GeoJSON (`.geojson`/`.json`) or a label raster.
    #[arg(long)]
    pub gt: PathBuf,
    /// EvalConfig JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// JSON list of image rasters, `{"images": [...]}`, or a synth manifest.
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value_t = deadwood::splitter::DEFAULT_BIN_SIZE)]
    pub bin_size: f64,
    /// Train, validation and test shares, `a,b,c`.
    #[arg(long, value_parser = parse_floats::<3>, default_value = "0.7,0.2,0.1")]
    pub ratios: [f64; 3],
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = deadwood::splitter::DEFAULT_PATCH_SIZE)]
    pub patch_size: usize,
    #[arg(long, default_value_t = deadwood::splitter::DEFAULT_OVERLAP)]
    pub overlap: f64,
    /// Zero-pad border patches instead of anchoring them flush.
    #[arg(long)]
    pub pad: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// SceneSpec JSON, or an array of them.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Number of scenes when the spec is a single object; seeds count up.
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Image raster drawn in grayscale underneath.
    #[arg(long)]
    pub base: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub band: usize,
    /// Opacity of instance colours over the base.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Corpus manifest written by `synth`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// PipelineConfig JSON shared by all rows.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// EvalConfig JSON.
    #[arg(long)]
    pub eval_config: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Bootstrap resamples for the final-vs-raw comparison.
    #[arg(long, default_value_t = 2000)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_preset(s: &str) -> Result<StagePreset, String> {
    s.parse().map_err(|e: deadwood::Error| e.to_string())
}

/// `a,b,...` with exactly `N` numbers.
fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> =
        s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated values, got {}", v.len()))
}

/// Status for an error chain: I/O anywhere in the chain wins.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<deadwood::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(image::ImageError::IoError(_)) = cause.downcast_ref::<image::ImageError>() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n as usize).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    let ctx = meta::Context::new(&cli);
    let result = match &cli.command {
        Command::Targets(a) => commands::targets(&ctx, a),
        Command::LossEval(a) => commands::loss_eval(&ctx, a),
        Command::Postprocess(a) => commands::postprocess(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Split(a) => commands::split(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Render(a) => commands::render(&ctx, a),
        Command::Ablate(a) => commands::ablate(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
