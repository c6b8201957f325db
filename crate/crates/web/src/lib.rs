//! Browser bindings for the demo page in `www/`.
//!
//! Three operations are exposed: sampling an activation curve, simulating a
//! drift trajectory, and measuring FTA sparsity on random inputs. Each one is
//! a plain Rust function (tested natively) wrapped by a thin `wasm_bindgen`
//! export.

use fta_core::drift::{derive_params, DriftConfig, DriftProcess};
use fta_core::tiling::{fta_backward, fta_forward, sparsity_upper_bound, ta_forward};
use fta_core::TilingConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Activation and derivative of every tile at evenly spaced inputs.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCurve {
    bins: usize,
    z: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

#[wasm_bindgen]
impl ActivationCurve {
    #[wasm_bindgen(getter)]
    pub fn bins(&self) -> usize {
        self.bins
    }

    #[wasm_bindgen(getter)]
    pub fn z(&self) -> Vec<f64> {
        self.z.clone()
    }

    /// Row-major `points × bins`.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Row-major `points × bins`.
    #[wasm_bindgen(getter)]
    pub fn slopes(&self) -> Vec<f64> {
        self.slopes.clone()
    }
}

fn tiling(lower: f64, upper: f64, tile_width: f64, eta: f64) -> Result<TilingConfig, String> {
    TilingConfig::new(lower, upper, tile_width, eta).map_err(|e| e.to_string())
}

/// Samples FTA (or TA when `hard`) on `[l - η - δ, u + η + δ]`.
pub fn activation_curve(
    lower: f64,
    upper: f64,
    tile_width: f64,
    eta: f64,
    points: usize,
    hard: bool,
) -> Result<ActivationCurve, String> {
    let cfg = tiling(lower, upper, tile_width, eta)?;
    if !(2..=20_000).contains(&points) {
        return Err("points must lie in 2..=20000".into());
    }
    let pad = cfg.eta() + cfg.tile_width();
    let (a, b) = (cfg.lower() - pad, cfg.upper() + pad);
    let mut curve = ActivationCurve {
        bins: cfg.bins(),
        z: Vec::with_capacity(points),
        values: Vec::with_capacity(points * cfg.bins()),
        slopes: Vec::with_capacity(points * cfg.bins()),
    };
    for i in 0..points {
        let z = a + (b - a) * i as f64 / (points - 1) as f64;
        curve.z.push(z);
        if hard {
            curve.values.extend(ta_forward(z, &cfg).into_inner());
            curve.slopes.extend(std::iter::repeat_n(0.0, cfg.bins()));
        } else {
            curve.values.extend(fta_forward(z, &cfg).into_inner());
            curve.slopes.extend(fta_backward(z, &cfg));
        }
    }
    Ok(curve)
}

/// Inputs of a drift stream together with its moving mean.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    inputs: Vec<f64>,
    means: Vec<f64>,
    equilibrium_var: f64,
}

#[wasm_bindgen]
impl Trajectory {
    #[wasm_bindgen(getter)]
    pub fn inputs(&self) -> Vec<f64> {
        self.inputs.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn means(&self) -> Vec<f64> {
        self.means.clone()
    }

    /// Stationary variance of the inputs, `(B/2)²`.
    #[wasm_bindgen(getter, js_name = equilibriumVar)]
    pub fn equilibrium_var(&self) -> f64 {
        self.equilibrium_var
    }

    /// Sample variance of the simulated inputs.
    #[wasm_bindgen(getter, js_name = sampleVar)]
    pub fn sample_var(&self) -> f64 {
        let n = self.inputs.len() as f64;
        let m = self.inputs.iter().sum::<f64>() / n;
        self.inputs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }
}

pub fn drift_trajectory(
    difficulty: f64,
    bound: f64,
    steps: usize,
    segment_length: usize,
    seed: u64,
) -> Result<Trajectory, String> {
    if !(2..=1_000_000).contains(&steps) || segment_length == 0 {
        return Err("steps must lie in 2..=1000000 and segments must be non-empty".into());
    }
    let params = derive_params(difficulty, bound).map_err(|e| e.to_string())?;
    let mut stream = DriftProcess::new(DriftConfig {
        difficulty,
        bound,
        segment_length,
        seed,
    })
    .map_err(|e| e.to_string())?;
    let mut t = Trajectory {
        inputs: Vec::with_capacity(steps),
        means: Vec::with_capacity(steps),
        equilibrium_var: params.equilibrium_var,
    };
    for _ in 0..steps {
        let (x, _) = stream.next_sample();
        t.inputs.push(x);
        t.means.push(stream.mean());
    }
    Ok(t)
}

/// Nonzero counts of FTA outputs on uniform inputs in `[l, u]`.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityStats {
    /// Mean fraction of active tiles.
    #[wasm_bindgen(readonly)]
    pub mean_active: f64,
    /// Largest number of active tiles seen.
    #[wasm_bindgen(readonly)]
    pub max_active: usize,
    /// Guaranteed maximum, `2⌊η/δ⌋ + 3`.
    #[wasm_bindgen(readonly)]
    pub bound: usize,
    #[wasm_bindgen(readonly)]
    pub bins: usize,
}

pub fn sparsity_stats(
    lower: f64,
    upper: f64,
    tile_width: f64,
    eta: f64,
    samples: usize,
    seed: u64,
) -> Result<SparsityStats, String> {
    let cfg = tiling(lower, upper, tile_width, eta)?;
    if !(1..=1_000_000).contains(&samples) {
        return Err("samples must lie in 1..=1000000".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0usize;
    let mut max_active = 0usize;
    for _ in 0..samples {
        let z = rng.random_range(cfg.lower()..=cfg.upper());
        let n = fta_forward(z, &cfg).nonzero_count();
        total += n;
        max_active = max_active.max(n);
    }
    Ok(SparsityStats {
        mean_active: total as f64 / (samples * cfg.bins()) as f64,
        max_active,
        bound: sparsity_upper_bound(&cfg),
        bins: cfg.bins(),
    })
}

#[wasm_bindgen(js_name = activationCurve)]
pub fn activation_curve_js(
    lower: f64,
    upper: f64,
    tile_width: f64,
    eta: f64,
    points: usize,
    hard: bool,
) -> Result<ActivationCurve, JsError> {
    activation_curve(lower, upper, tile_width, eta, points, hard).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = driftTrajectory)]
pub fn drift_trajectory_js(
    difficulty: f64,
    bound: f64,
    steps: usize,
    segment_length: usize,
    seed: u32,
) -> Result<Trajectory, JsError> {
    drift_trajectory(difficulty, bound, steps, segment_length, seed as u64)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sparsityStats)]
pub fn sparsity_stats_js(
    lower: f64,
    upper: f64,
    tile_width: f64,
    eta: f64,
    samples: usize,
    seed: u32,
) -> Result<SparsityStats, JsError> {
    sparsity_stats(lower, upper, tile_width, eta, samples, seed as u64).map_err(|e| JsError::new(&e))
}
