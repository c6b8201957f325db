mod common;

use common::*;
use fta_core::metrics::{self, Pairing};
use fta_core::net::{checkpoint, Activation, ActivationPenalty, Adam, DenseNet, LayerSpec, RbfConfig};
use fta_core::tiling::*;
use fta_core::{Matrix, TilingConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Tilings with 2..60 tiles over a random interval and `η` up to three tiles.
fn tiling() -> impl Strategy<Value = TilingConfig> {
    (-50.0..50.0f64, 0.1..40.0f64, 2usize..60, 0.0..3.0f64).prop_map(|(l, span, k, eta_tiles)| {
        let cfg = TilingConfig::from_bins(l, l + span, k, 0.0).unwrap();
        let eta = eta_tiles * cfg.tile_width();
        cfg.with_eta(eta).unwrap()
    })
}

fn point_in(cfg: &TilingConfig, t: f64) -> f64 {
    cfg.lower() + t * (cfg.upper() - cfg.lower())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ta_is_one_hot_between_cutoffs(cfg in tiling(), t in 0.0..1.0f64) {
        let z = point_in(&cfg, t);
        let c = tiling_vector(&cfg);
        prop_assume!(c.iter().chain([cfg.upper()].iter()).all(|ci| (z - ci).abs() > 1e-9));
        let v = ta_forward(z, &cfg);
        prop_assert_eq!(v.nonzero_count(), 1);
        prop_assert!(v.as_slice().iter().all(|x| *x == 0.0 || *x == 1.0));
        let j = v.support()[0];
        prop_assert!(c[j] < z && z < c[j] + cfg.tile_width());
    }

    #[test]
    fn ta_is_two_hot_on_interior_cutoffs(cfg in tiling(), i in 1usize..60) {
        prop_assume!(i < cfg.bins());
        let z = tiling_vector(&cfg)[i];
        prop_assert_eq!(ta_forward(z, &cfg).support(), vec![i - 1, i]);
    }

    #[test]
    fn fta_respects_the_sparsity_bound(cfg in tiling(), t in 0.0..=1.0f64) {
        let z = point_in(&cfg, t);
        prop_assert!(fta_forward(z, &cfg).nonzero_count() <= sparsity_upper_bound(&cfg));
    }

    #[test]
    fn bound_is_attained_order_at_midpoints(cfg in tiling(), i in 1usize..58) {
        let cfg = cfg.with_eta(cfg.tile_width()).unwrap();
        prop_assume!(i + 1 < cfg.bins());
        let z = tiling_vector(&cfg)[i] + cfg.tile_width() / 2.0;
        prop_assert!(fta_forward(z, &cfg).nonzero_count() >= 3);
    }

    #[test]
    fn fta_decomposes_into_ta_plus_ramps(cfg in tiling(), t in -0.2..1.2f64) {
        // Ramps stay strictly positive only while η < 1.
        prop_assume!(cfg.eta() < 1.0);
        let z = point_in(&cfg, t);
        let ta = ta_forward(z, &cfg);
        let fta = fta_forward(z, &cfg);
        let (d, eta) = (cfg.tile_width(), cfg.eta());
        for (j, c) in tiling_vector(&cfg).into_iter().enumerate() {
            let delta = fta[j] - ta[j];
            let right = c + d;
            let in_band = (0.0 < z - right && z - right <= eta) || (0.0 < c - z && c - z <= eta);
            if ta[j] != 0.0 {
                prop_assert_eq!(delta, 0.0);
            } else if in_band {
                prop_assert!(delta > 0.0 && delta <= 1.0, "j={} delta={}", j, delta);
            } else {
                prop_assert_eq!(delta, 0.0);
            }
        }
    }

    #[test]
    fn fta_outputs_lie_in_unit_interval(cfg in tiling(), t in -0.5..1.5f64) {
        prop_assume!(cfg.eta() <= 1.0);
        let v = fta_forward(point_in(&cfg, t), &cfg);
        prop_assert!(v.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn fta_backward_matches_finite_differences(cfg in tiling(), t in -0.3..1.3f64) {
        let z = point_in(&cfg, t);
        prop_assume!(breakpoint_distance(z, &cfg) > 1e-5);
        let numeric = fta_finite_difference(z, &cfg, 1e-6);
        let analytic = fta_backward(z, &cfg);
        for (a, n) in analytic.iter().zip(&numeric) {
            prop_assert!((a - n).abs() <= 1e-6, "analytic {} numeric {}", a, n);
        }
    }

    #[test]
    fn eta_equal_delta_always_leaves_a_gradient(cfg in tiling(), t in 0.0..1.0f64) {
        let cfg = cfg.with_eta(cfg.tile_width()).unwrap();
        let z = point_in(&cfg, t);
        prop_assume!(tiling_vector(&cfg).iter().all(|c| z != *c));
        prop_assert!(fta_backward(z, &cfg).iter().any(|g| *g != 0.0));
    }

    #[test]
    fn fta_features_respect_the_instance_sparsity_bound(cfg in tiling(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pre = uniform_matrix(8, 5, 0.5, &mut rng);
        for v in pre.as_mut_slice() {
            *v = point_in(&cfg, *v + 0.5);
        }
        let f = fta_layer_forward(&pre, &cfg).unwrap();
        let bound = sparsity_upper_bound(&cfg) as f64 / cfg.bins() as f64;
        prop_assert!(metrics::instance_sparsity(&f) <= bound + 1e-12);
    }

    #[test]
    fn overlap_never_exceeds_instance_sparsity(seed in any::<u64>(), density in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sparse = |m: Matrix| {
            let mut m = m;
            for v in m.as_mut_slice() {
                if rand::Rng::random::<f64>(&mut rng) > density {
                    *v = 0.0;
                }
            }
            m
        };
        let a = sparse(Matrix::from_vec(16, 30, vec![1.0; 480]).unwrap());
        let b = sparse(Matrix::from_vec(16, 30, vec![1.0; 480]).unwrap());
        let o = metrics::overlap_sparsity(&a, &b).unwrap();
        prop_assert!(o <= metrics::instance_sparsity(&a).min(metrics::instance_sparsity(&b)) + 1e-12);
    }

    #[test]
    fn interference_statistics_stay_in_range(seed in any::<u64>(), all in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grads: Vec<Vec<f64>> = (0..10)
            .map(|_| uniform_matrix(1, 6, 1.0, &mut rng).into_vec())
            .collect();
        for g in &grads {
            let n = metrics::normalized(g).unwrap();
            let norm: f64 = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-9);
        }
        let pairing = if all { Pairing::AllPairs } else { Pairing::Disjoint };
        let r = metrics::interference(&grads, pairing).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r.m1));
        prop_assert!(r.m2 <= 0.0 && r.m2 >= -1.0);
        prop_assert!((0.0..=1.0).contains(&r.m3));
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>()) {
        let net = small_net(Activation::Tanh, ActivationPenalty::None, 0.0, seed);
        let mut buf = Vec::new();
        checkpoint::write(&net, &mut buf).unwrap();
        let mut restored = small_net(Activation::Tanh, ActivationPenalty::None, 0.0, seed.wrapping_add(1));
        checkpoint::read_into(&mut restored, buf.as_slice()).unwrap();
        prop_assert_eq!(restored.layers(), net.layers());
    }
}

fn small_net(act: Activation, penalty: ActivationPenalty, boundary: f64, seed: u64) -> DenseNet {
    let width = 6 * act.expansion();
    DenseNet::new(
        vec![
            LayerSpec::new(3, 5, Activation::Tanh),
            LayerSpec::new(5, 6, act)
                .with_penalty(penalty)
                .with_boundary_penalty(boundary),
            LayerSpec::new(width, 2, Activation::Linear),
        ],
        seed,
    )
    .unwrap()
}

fn activations() -> Vec<(&'static str, Activation, ActivationPenalty, f64)> {
    let fta = TilingConfig::new(-1.0, 1.0, 0.25, 0.25).unwrap();
    vec![
        ("relu", Activation::Relu, ActivationPenalty::None, 0.0),
        ("tanh", Activation::Tanh, ActivationPenalty::None, 0.0),
        ("linear", Activation::Linear, ActivationPenalty::None, 0.0),
        ("fta", Activation::Fta(fta), ActivationPenalty::None, 0.0),
        ("fta+boundary", Activation::Fta(fta), ActivationPenalty::None, 0.3),
        ("rbf", Activation::Rbf(RbfConfig::on_tiling(&fta, 0.5).unwrap()), ActivationPenalty::None, 0.0),
        ("relu+l1", Activation::Relu, ActivationPenalty::L1(0.05), 0.0),
        ("tanh+l2", Activation::Tanh, ActivationPenalty::L2(0.05), 0.0),
    ]
}

#[test]
fn network_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (name, act, penalty, boundary) in activations() {
        let mut total = GradCheck::default();
        for seed in 0..10 {
            let net = small_net(act.clone(), penalty, boundary, seed);
            // Inputs wide enough to push some FTA pre-activations out of bounds.
            let x = uniform_matrix(4, 3, 3.0, &mut rng);
            let d_out = uniform_matrix(4, 2, 1.0, &mut rng);
            let r = check_network_gradient(&net, &x, &d_out, 40, 1e-6, 1e-5, &mut rng);
            total.checked += r.checked;
            total.skipped += r.skipped;
            total.failures += r.failures;
            total.max_rel_error = total.max_rel_error.max(r.max_rel_error);
        }
        assert_eq!(total.failures, 0, "{name}: {total:?}");
        assert!(total.checked > 300, "{name}: {total:?}");
    }
}

#[test]
fn adam_reduces_loss_on_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (name, act, penalty, boundary) in activations() {
        let mut net = small_net(act, penalty, boundary, 5);
        let x = uniform_matrix(16, 3, 1.0, &mut rng);
        let target = uniform_matrix(16, 2, 1.0, &mut rng);
        let mut adam = Adam::new(&net, 1e-2);
        let loss = |net: &DenseNet| {
            let (y, tape) = net.forward(&x).unwrap();
            let mse: f64 = y
                .as_slice()
                .iter()
                .zip(target.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / 16.0;
            (mse + net.penalty(&tape), y, tape)
        };
        let (before, ..) = loss(&net);
        for _ in 0..200 {
            let (_, y, tape) = loss(&net);
            let d_out = Matrix::from_vec(
                16,
                2,
                y.as_slice()
                    .iter()
                    .zip(target.as_slice())
                    .map(|(a, b)| 2.0 * (a - b) / 16.0)
                    .collect(),
            )
            .unwrap();
            let grads = net.backward(&tape, &d_out).unwrap();
            adam.step(&mut net, &grads).unwrap();
        }
        let (after, ..) = loss(&net);
        assert!(after < 0.8 * before, "{name}: {before} -> {after}");
    }
}
