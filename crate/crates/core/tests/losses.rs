mod common;

use deadwood::grid::Grid;
use deadwood::losses::{centroid_loss, hybrid_loss, seg_loss, total_loss, LossWeights};
use deadwood::raster::{Annotation, GeoTransform};
use deadwood::targets::{build_target_stack, TargetStack};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_stack(seed: u64) -> TargetStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.random_range(4..24), rng.random_range(4..24));
    let anns: Vec<Annotation> =
        common::random_polygons(&mut rng, w, h, 4).into_iter().map(|p| Annotation::from_polygon(p).unwrap()).collect();
    build_target_stack(&anns, GeoTransform::identity(), (h, w), 3.0).unwrap()
}

fn random_pred(stack: &TargetStack, seed: u64) -> Vec<Grid<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = stack.shape();
    let mut g = |lo: f64, hi: f64| Grid::from_fn(w, h, |_, _| rng.random_range(lo..hi));
    vec![g(-8.0, 8.0), g(-0.5, 1.5), g(-1.5, 1.5)]
}

fn weights() -> impl Strategy<Value = LossWeights> {
    (
        0.0f64..3.0,
        0.0f64..3.0,
        0.0f64..3.0,
        0.0f64..3.0,
        0.0f64..20.0,
        0.1f64..5.0,
        prop_oneof![Just(0.0), 0.5f64..3.0],
        0.0f64..=1.0,
    )
        .prop_map(|(d, c, hy, s, b, pw, g, a)| LossWeights {
            lambda_dice: d,
            lambda_centroid: c,
            lambda_hybrid: hy,
            lambda_sdt: s,
            lambda_boundary: b,
            bce_pos_weight: pw,
            focal_gamma: g,
            focal_alpha: a,
        })
}

fn perfect_pred(stack: &TargetStack) -> Vec<Grid<f64>> {
    vec![stack.mask.map(|&b| if b { 40.0 } else { -40.0 }), stack.centroid_heatmap.to_f64(), stack.hybrid.to_f64()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn every_component_is_non_negative(seed in any::<u64>(), w in weights()) {
        let stack = random_stack(seed);
        let l = total_loss(&random_pred(&stack, seed ^ 1), &stack, &w).unwrap();
        for (name, v) in l.components.named() {
            prop_assert!(v >= 0.0 && v.is_finite(), "{name} = {v}");
        }
        prop_assert!(l.total >= 0.0);
    }

    #[test]
    fn total_recombines_components(seed in any::<u64>(), w in weights()) {
        let stack = random_stack(seed);
        let l = total_loss(&random_pred(&stack, seed ^ 2), &stack, &w).unwrap();
        let c = l.components;
        let base = if w.focal_gamma > 0.0 { c.focal } else { c.bce };
        prop_assert!((c.seg - (base + w.lambda_dice * c.dice)).abs() <= 1e-12 * (1.0 + c.seg));
        prop_assert!((c.hybrid - (w.lambda_sdt * c.sdt + w.lambda_boundary * c.boundary)).abs() <= 1e-12 * (1.0 + c.hybrid));
        let expect = c.seg + w.lambda_centroid * c.centroid + w.lambda_hybrid * c.hybrid;
        prop_assert!((l.total - expect).abs() <= 1e-12 * (1.0 + l.total));
    }

    #[test]
    fn zero_auxiliary_weights_leave_segmentation(seed in any::<u64>(), w in weights()) {
        let stack = random_stack(seed);
        let w = LossWeights { lambda_centroid: 0.0, lambda_hybrid: 0.0, ..w };
        let l = total_loss(&random_pred(&stack, seed ^ 3), &stack, &w).unwrap();
        prop_assert_eq!(l.total, l.components.seg);
        prop_assert!(l.gradient[1].as_slice().iter().chain(l.gradient[2].as_slice()).all(|&g| g == 0.0));
    }

    #[test]
    fn centroid_term_scales_linearly(seed in any::<u64>(), k in 0.0f64..10.0) {
        let stack = random_stack(seed);
        let pred = random_pred(&stack, seed ^ 4);
        let base = LossWeights { lambda_centroid: 0.0, ..Default::default() };
        let one = total_loss(&pred, &stack, &LossWeights { lambda_centroid: 1.0, ..base }).unwrap();
        let scaled = total_loss(&pred, &stack, &LossWeights { lambda_centroid: k, ..base }).unwrap();
        let zero = total_loss(&pred, &stack, &base).unwrap();
        let lhs = scaled.total - zero.total;
        let rhs = k * (one.total - zero.total);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + one.total) * (1.0 + k));
    }

    #[test]
    fn dice_ignores_pixel_order(
        pairs in proptest::collection::vec((-6.0f64..6.0, proptest::bool::ANY), 2..80),
        shuffle_seed in any::<u64>(),
    ) {
        let n = pairs.len();
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let t: Vec<f64> = pairs.iter().map(|p| if p.1 { 1.0 } else { 0.0 }).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let w = LossWeights::default();
        let a = seg_loss(&Grid::from_vec(n, 1, x.clone()).unwrap(), &Grid::from_vec(n, 1, t.clone()).unwrap(), &w).unwrap();
        let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let pt: Vec<f64> = perm.iter().map(|&i| t[i]).collect();
        let b = seg_loss(&Grid::from_vec(n, 1, px).unwrap(), &Grid::from_vec(n, 1, pt).unwrap(), &w).unwrap();
        prop_assert!((a.components.dice - b.components.dice).abs() <= 1e-12);
        prop_assert!((a.components.bce - b.components.bce).abs() <= 1e-12);
    }

    #[test]
    fn perfect_prediction_is_nearly_free(seed in any::<u64>()) {
        let stack = random_stack(seed);
        let l = total_loss(&perfect_pred(&stack), &stack, &LossWeights::default()).unwrap();
        prop_assert!(l.total <= 1e-6, "total {}", l.total);
    }

    #[test]
    fn centroid_loss_matches_naive_mean(v in proptest::collection::vec((-2.0f64..2.0, 0.0f64..1.0), 1..200)) {
        let n = v.len();
        let p = Grid::from_vec(n, 1, v.iter().map(|x| x.0).collect()).unwrap();
        let t = Grid::from_vec(n, 1, v.iter().map(|x| x.1).collect()).unwrap();
        let naive: f64 = v.iter().map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
        let got = centroid_loss(&p, &t).unwrap().total;
        prop_assert!((got - naive).abs() <= 1e-12 * (1.0 + naive));
    }
}

#[test]
fn hybrid_loss_on_hand_example() {
    // one boundary pixel predicted at -0.5, two interior pixels off by 0.5 and 2
    let p = Grid::from_vec(3, 1, vec![-0.5, 0.5, 2.5]).unwrap();
    let t = Grid::from_vec(3, 1, vec![-1.0, 0.0, 0.5]).unwrap();
    let w = LossWeights { lambda_sdt: 2.0, lambda_boundary: 10.0, ..Default::default() };
    let l = hybrid_loss(&p, &t, &w).unwrap();
    assert!((l.components.boundary - 0.5).abs() < 1e-15);
    assert!((l.components.sdt - (0.125 + 1.5) / 2.0).abs() < 1e-15);
    assert!((l.total - (2.0 * 0.8125 + 10.0 * 0.5)).abs() < 1e-12);
}

#[test]
fn mismatched_shapes_and_bad_targets_are_rejected() {
    let a = Grid::<f64>::new(3, 2);
    let b = Grid::<f64>::new(2, 3);
    assert!(centroid_loss(&a, &b).is_err());
    let bad = Grid::filled(3, 2, 0.5);
    assert!(seg_loss(&a, &bad, &LossWeights::default()).is_err());
    assert!(hybrid_loss(&a, &Grid::filled(3, 2, 1.5), &LossWeights::default()).is_err());
    let neg = LossWeights { lambda_dice: -1.0, ..Default::default() };
    assert!(seg_loss(&a, &Grid::new(3, 2), &neg).is_err());
}

#[test]
fn focal_loss_down_weights_easy_pixels() {
    let t = Grid::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
    let easy = Grid::from_vec(2, 1, vec![4.0, -4.0]).unwrap();
    let w = LossWeights { lambda_dice: 0.0, focal_gamma: 2.0, focal_alpha: 0.5, ..Default::default() };
    let l = seg_loss(&easy, &t, &w).unwrap();
    assert!(l.components.focal < 0.5 * l.components.bce * 1e-3);
    // γ = 0 reproduces BCE exactly
    let plain = seg_loss(&easy, &t, &LossWeights { lambda_dice: 0.0, ..Default::default() }).unwrap();
    assert_eq!(plain.total, plain.components.bce);
}
