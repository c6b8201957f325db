//! Finite-difference oracles shared by the property tests and the acceptance
//! runner.

#![allow(dead_code)]

use fta_core::net::{Activation, DenseNet};
use fta_core::tiling::fta_forward;
use fta_core::{Matrix, TilingConfig};
use rand::Rng;

/// Distance from `z` to the nearest point where an FTA output has a kink:
/// every cutoff `c_j` (which is also the right edge of tile `j - 1`) and the
/// ramp ends `c_j - η`, `c_j + δ + η`.
pub fn breakpoint_distance(z: f64, cfg: &TilingConfig) -> f64 {
    let (l, d, eta) = (cfg.lower(), cfg.tile_width(), cfg.eta());
    let mut best = f64::INFINITY;
    for j in 0..=cfg.bins() {
        let c = l + j as f64 * d;
        for p in [c, c - eta, c + eta] {
            best = best.min((z - p).abs());
        }
    }
    best
}

/// Central finite difference of every FTA output.
pub fn fta_finite_difference(z: f64, cfg: &TilingConfig, h: f64) -> Vec<f64> {
    let up = fta_forward(z + h, cfg);
    let down = fta_forward(z - h, cfg);
    up.as_slice()
        .iter()
        .zip(down.as_slice())
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect()
}

/// `Σ d_out ⊙ net(x)` plus the network's activation penalties: the scalar
/// whose gradient [`DenseNet::backward`] returns.
pub fn probe_loss(net: &DenseNet, x: &Matrix, d_out: &Matrix) -> f64 {
    let (y, tape) = net.forward(x).expect("forward");
    let data: f64 = y
        .as_slice()
        .iter()
        .zip(d_out.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    data + net.penalty(&tape)
}

/// Identifies which smooth piece of every activation the network is on.
/// Two parameter settings with the same signature lie on one piece, so a
/// central difference between them does not straddle a kink.
fn branch_signature(net: &DenseNet, x: &Matrix) -> Vec<i64> {
    let (_, tape) = net.forward(x).expect("forward");
    let mut sig = Vec::new();
    for (i, layer) in net.layers().iter().enumerate() {
        let spec = layer.spec();
        let bound = match &spec.activation {
            Activation::Fta(cfg) if spec.boundary_penalty > 0.0 => {
                Some(cfg.lower().abs().max(cfg.upper().abs()))
            }
            _ => None,
        };
        for &z in tape.pre_activation(i).as_slice() {
            match &spec.activation {
                Activation::Relu => sig.push((z > 0.0) as i64),
                Activation::Fta(cfg) => {
                    let (l, d, eta) = (cfg.lower(), cfg.tile_width(), cfg.eta());
                    sig.push(((z - l) / d).floor() as i64);
                    sig.push(((z - l + eta) / d).floor() as i64);
                    sig.push(((z - l - eta) / d).floor() as i64);
                }
                _ => {}
            }
            if let Some(b) = bound {
                sig.push((z > b) as i64 - (z < -b) as i64);
            }
        }
        if spec.penalty != fta_core::net::ActivationPenalty::None {
            for &h in tape.layer_output(i).as_slice() {
                sig.push((h > 0.0) as i64 - (h < 0.0) as i64);
            }
        }
    }
    sig
}

fn perturbed(net: &DenseNet, layer: usize, index: usize, delta: f64) -> DenseNet {
    let mut out = net.clone();
    let l = &net.layers()[layer];
    let mut w = l.weights().clone();
    let mut b = l.bias().to_vec();
    let n_w = w.as_slice().len();
    if index < n_w {
        w.as_mut_slice()[index] += delta;
    } else {
        b[index - n_w] += delta;
    }
    out.set_layer_params(layer, w, b).expect("same shapes");
    out
}

#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub checked: usize,
    pub skipped: usize,
    pub failures: usize,
    pub max_rel_error: f64,
}

/// Compares `backward` against central differences on `probes` random
/// parameters. Probes whose perturbation crosses a kink are skipped.
pub fn check_network_gradient<R: Rng>(
    net: &DenseNet,
    x: &Matrix,
    d_out: &Matrix,
    probes: usize,
    h: f64,
    rel_tol: f64,
    rng: &mut R,
) -> GradCheck {
    let (_, tape) = net.forward(x).expect("forward");
    let grads = net.backward(&tape, d_out).expect("backward");
    let base_sig = branch_signature(net, x);
    let mut report = GradCheck::default();
    for _ in 0..probes {
        let layer = rng.random_range(0..net.layers().len());
        let n = net.layers()[layer].param_count();
        let index = rng.random_range(0..n);
        let up = perturbed(net, layer, index, h);
        let down = perturbed(net, layer, index, -h);
        if branch_signature(&up, x) != base_sig || branch_signature(&down, x) != base_sig {
            report.skipped += 1;
            continue;
        }
        let numeric = (probe_loss(&up, x, d_out) - probe_loss(&down, x, d_out)) / (2.0 * h);
        let g = &grads.layers[layer];
        let n_w = g.weights.as_slice().len();
        let analytic = if index < n_w {
            g.weights.as_slice()[index]
        } else {
            g.bias[index - n_w]
        };
        let scale = analytic.abs().max(numeric.abs()).max(1e-2);
        let rel = (analytic - numeric).abs() / scale;
        report.checked += 1;
        report.max_rel_error = report.max_rel_error.max(rel);
        if rel > rel_tol {
            report.failures += 1;
        }
    }
    report
}

/// Random matrix with entries uniform in `[-a, a]`.
pub fn uniform_matrix<R: Rng>(rows: usize, cols: usize, a: f64, rng: &mut R) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-a..a)).collect())
        .expect("shape")
}
