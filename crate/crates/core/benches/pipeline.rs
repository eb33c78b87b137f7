//! Sequential vs data-parallel throughput of the heavy kernels.
//!
//! Each kernel runs inside a one-thread rayon pool ("sequential") and inside
//! the default global pool ("parallel"). Building with
//! `--no-default-features` removes rayon from the library entirely; the
//! "parallel" rows then measure the sequential fallback too.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use deadwood::components::label_components_tiled;
use deadwood::filters::gaussian_blur;
use deadwood::grid::Connectivity;
use deadwood::metrics::{evaluate, EvalConfig};
use deadwood::postprocess::{run_pipeline, threshold, PipelineConfig};
use deadwood::synth::{generate_scene, NoiseSigma, SceneSpec};
use std::hint::black_box;

fn modes() -> Vec<(&'static str, rayon::ThreadPool)> {
    let seq = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let par = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", seq), ("parallel", par)]
}

fn kernels(c: &mut Criterion) {
    let spec = SceneSpec {
        extent: [1024, 1024],
        density: 20.0,
        overlap_probability: 0.3,
        noise_sigma: NoiseSigma::Uniform(0.05),
        blur_sigma: 1.0,
        seed: 1,
        ..Default::default()
    };
    let scene = generate_scene(&spec).unwrap();
    let seg = scene.prediction.channel(0).unwrap();
    let mask = threshold(&seg, 0.5);
    let cfg = PipelineConfig { tile_size: 256, ..Default::default() };
    let out = run_pipeline(&scene.prediction, &cfg).unwrap();
    let pairs = vec![(out.instances, scene.targets.instances.clone()); 8];

    let mut group = c.benchmark_group("kernels_1024");
    group.sample_size(10);
    for (name, pool) in modes() {
        group.bench_function(BenchmarkId::new("gaussian_blur", name), |b| {
            b.iter(|| pool.install(|| gaussian_blur(black_box(&seg), 2.0)))
        });
        group.bench_function(BenchmarkId::new("components", name), |b| {
            b.iter(|| pool.install(|| label_components_tiled(black_box(&mask), Connectivity::Eight, 256)))
        });
        group.bench_function(BenchmarkId::new("pipeline", name), |b| {
            b.iter(|| pool.install(|| run_pipeline(black_box(&scene.prediction), &cfg).unwrap()))
        });
        group.bench_function(BenchmarkId::new("evaluate_x8", name), |b| {
            b.iter(|| pool.install(|| evaluate(black_box(&pairs), &EvalConfig::default()).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
