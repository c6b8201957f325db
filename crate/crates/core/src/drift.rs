//! Piecewise random walk: a Gaussian input stream whose mean holds for `T`
//! steps and then moves by an AR(1) step.
//!
//! ```text
//! S ← (1 - c)·S + E,   E ~ N(0, σ²)        once every T steps
//! X ~ N(S, β²),        Y = sin(2π X²)      every step
//! ```
//!
//! The difficulty `d ∈ [0, 1)` sets `c = 1 - √(1-d)`, `σ² = d²(B/2)²` and
//! `β² = (1-d)(B/2)²`. Whatever `d`, the stationary marginal of `X` is
//! `N(0, (B/2)²)`; `d = 0` gives i.i.d. draws and `d → 1` gives long runs of
//! nearly identical inputs. Normal variates come from `rand_distr`'s ziggurat
//! sampler driven by ChaCha8.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Target function of the regression task.
#[inline]
pub fn label(x: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x * x).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DriftConfig {
    pub difficulty: f64,
    /// High-probability bound `B`; the equilibrium standard deviation is `B/2`.
    pub bound: f64,
    /// Steps between moves of the mean.
    pub segment_length: usize,
    pub seed: u64,
}

impl DriftConfig {
    /// Segment length for a run of `total_steps` split into 50 stationary
    /// segments.
    pub fn default_segment_length(total_steps: usize) -> usize {
        (total_steps / 50).max(1)
    }
}

/// Quantities derived from `(d, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftParams {
    /// `c`
    pub walk_coefficient: f64,
    /// `σ²`, variance of each step of the mean
    pub walk_noise_var: f64,
    /// `β²`, variance of `X` around the current mean
    pub observation_var: f64,
    /// `ξ²`, stationary variance of `X`
    pub equilibrium_var: f64,
    /// `ν²`, stationary variance of the mean (0 when `d = 0`)
    pub walk_equilibrium_var: f64,
}

pub fn derive_params(difficulty: f64, bound: f64) -> Result<DriftParams> {
    if !(0.0..1.0).contains(&difficulty) {
        return Err(Error::Domain(format!(
            "difficulty must lie in [0, 1), got {difficulty}"
        )));
    }
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::Domain(format!("bound must be positive, got {bound}")));
    }
    let half_sq = (bound / 2.0).powi(2);
    let c = 1.0 - (1.0 - difficulty).sqrt();
    let sigma2 = difficulty * difficulty * half_sq;
    let nu2 = if difficulty == 0.0 {
        0.0
    } else {
        sigma2 / (2.0 * c - c * c)
    };
    Ok(DriftParams {
        walk_coefficient: c,
        walk_noise_var: sigma2,
        observation_var: (1.0 - difficulty) * half_sq,
        equilibrium_var: half_sq,
        walk_equilibrium_var: nu2,
    })
}

/// Stateful generator of `(x, y)` pairs.
#[derive(Debug, Clone)]
pub struct DriftProcess {
    cfg: DriftConfig,
    params: DriftParams,
    mean: f64,
    step_in_segment: usize,
    steps: u64,
    rng: ChaCha8Rng,
}

impl DriftProcess {
    /// Starts the walk at equilibrium: `S₀ = 0` when `d = 0`, otherwise
    /// `S₀ ~ N(0, ν²)`.
    pub fn new(cfg: DriftConfig) -> Result<Self> {
        if cfg.segment_length == 0 {
            return Err(Error::Domain("segment length must be positive".into()));
        }
        let params = derive_params(cfg.difficulty, cfg.bound)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mean = if cfg.difficulty == 0.0 {
            0.0
        } else {
            params.walk_equilibrium_var.sqrt() * normal(&mut rng)
        };
        Ok(Self {
            cfg,
            params,
            mean,
            step_in_segment: 0,
            steps: 0,
            rng,
        })
    }

    pub fn params(&self) -> &DriftParams {
        &self.params
    }

    pub fn config(&self) -> &DriftConfig {
        &self.cfg
    }

    /// Current mean `S`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Samples emitted so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Emits the next `(x, y)`; the mean moves first when a segment ends.
    pub fn next_sample(&mut self) -> (f64, f64) {
        if self.step_in_segment == self.cfg.segment_length {
            self.step_in_segment = 0;
            let noise = self.params.walk_noise_var.sqrt() * normal(&mut self.rng);
            self.mean = (1.0 - self.params.walk_coefficient) * self.mean + noise;
        }
        self.step_in_segment += 1;
        self.steps += 1;
        let x = self.mean + self.params.observation_var.sqrt() * normal(&mut self.rng);
        (x, label(x))
    }
}

impl Iterator for DriftProcess {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        Some(self.next_sample())
    }
}

/// `n` i.i.d. draws from the stationary distribution `N(0, ξ²)` with labels.
pub fn equilibrium_batch(n: usize, params: &DriftParams, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    equilibrium_batch_with(n, params, &mut rng)
}

pub(crate) fn equilibrium_batch_with(
    n: usize,
    params: &DriftParams,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64)> {
    let sd = params.equilibrium_var.sqrt();
    (0..n)
        .map(|_| {
            let x = sd * normal(rng);
            (x, label(x))
        })
        .collect()
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
