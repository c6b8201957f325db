//! Online regression on the drift stream.
//!
//! A network is trained one step per iteration on samples from a
//! [`DriftProcess`] and, after every step, scored by mean squared error on a
//! fresh batch from the stream's equilibrium distribution. The equilibrium
//! batches come from their own seed lane, so they never perturb the training
//! stream.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::drift::{self, DriftConfig, DriftProcess};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net::{Activation, Adam, DenseNet, LayerSpec};
use crate::seed;
use crate::tiling::TilingConfig;

/// Loss above which a run is flagged as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Learning rates swept for every network and difficulty.
pub const LEARNING_RATES: [f64; 8] = [1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6];

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Two FTA layers of 40 units, 40 tiles on `(-1, 1)` each, `η = 1/40`.
    Fta,
    /// Two ReLU layers of 50 units.
    Relu,
    /// Two ReLU layers of 200 units.
    ReluLarge,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 3] = [NetworkKind::Fta, NetworkKind::Relu, NetworkKind::ReluLarge];

    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::Fta => "fta",
            NetworkKind::Relu => "relu",
            NetworkKind::ReluLarge => "relu_large",
        }
    }
}

impl std::fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        NetworkKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown network kind `{s}`")))
    }
}

/// Tiling used by both hidden layers of the FTA regression network.
pub fn fta_tiling() -> TilingConfig {
    TilingConfig::from_bins(-1.0, 1.0, 40, 1.0 / 40.0).expect("valid tiling")
}

/// Scalar-in, scalar-out regression network of the given kind.
pub fn build_network(kind: NetworkKind, seed: u64) -> Result<DenseNet> {
    let specs = match kind {
        NetworkKind::Fta => {
            let fta = Activation::Fta(fta_tiling());
            let wide = 40 * fta.expansion();
            vec![
                LayerSpec::new(1, 40, fta.clone()),
                LayerSpec::new(wide, 40, fta),
                LayerSpec::new(wide, 1, Activation::Linear),
            ]
        }
        NetworkKind::Relu | NetworkKind::ReluLarge => {
            let w = if kind == NetworkKind::Relu { 50 } else { 200 };
            vec![
                LayerSpec::new(1, w, Activation::Relu),
                LayerSpec::new(w, w, Activation::Relu),
                LayerSpec::new(w, 1, Activation::Linear),
            ]
        }
    };
    DenseNet::new(specs, seed)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SupervisedRunConfig {
    pub kind: NetworkKind,
    pub difficulty: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    /// Stream samples per optimiser step.
    pub train_batch: usize,
    pub test_batch: usize,
    /// `B`; the equilibrium distribution is `N(0, (B/2)²)`.
    pub bound: f64,
    /// Steps per drift segment; `None` uses `iterations·train_batch / 50`.
    pub segment_length: Option<usize>,
    pub seed: u64,
}

impl SupervisedRunConfig {
    pub fn new(kind: NetworkKind, difficulty: f64, learning_rate: f64, seed: u64) -> Self {
        Self {
            kind,
            difficulty,
            learning_rate,
            iterations: 20_000,
            train_batch: 1,
            test_batch: 100,
            bound: 1.0,
            segment_length: None,
            seed,
        }
    }
}

/// Learning curve of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedRun {
    pub train_loss: Vec<f64>,
    pub eq_loss: Vec<f64>,
    /// Some loss exceeded [`DIVERGENCE_THRESHOLD`] or became non-finite.
    pub diverged: bool,
}

impl SupervisedRun {
    /// Mean equilibrium loss over the final 2,500 iterations.
    pub fn final_score(&self) -> f64 {
        final_score(&self.eq_loss)
    }
}

/// Mean of the last 2,500 entries of `curve` (or of all of them when shorter).
pub fn final_score(curve: &[f64]) -> f64 {
    let tail = &curve[curve.len().saturating_sub(2500)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn column(values: impl Iterator<Item = f64>) -> Matrix {
    let data: Vec<f64> = values.collect();
    Matrix::from_vec(data.len(), 1, data).expect("column shape")
}

fn mse_and_gradient(net: &DenseNet, xs: &Matrix, ys: &[f64]) -> Result<(f64, crate::net::Gradients)> {
    let (pred, tape) = net.forward(xs)?;
    let n = ys.len() as f64;
    let mut loss = 0.0;
    let d_out = column(pred.as_slice().iter().zip(ys).map(|(p, y)| {
        let e = p - y;
        loss += e * e / n;
        2.0 * e / n
    }));
    Ok((loss, net.backward(&tape, &d_out)?))
}

fn mse(net: &DenseNet, xs: &Matrix, ys: &[f64]) -> Result<f64> {
    let pred = net.predict(xs)?;
    let n = ys.len() as f64;
    Ok(pred.as_slice().iter().zip(ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n)
}

/// Trains one network on the drift stream and records its learning curve.
///
/// A diverged run keeps its curve up to the failing iteration and pads the
/// rest with infinity.
pub fn run_supervised(cfg: &SupervisedRunConfig) -> Result<SupervisedRun> {
    if cfg.iterations == 0 || cfg.train_batch == 0 || cfg.test_batch == 0 {
        return Err(Error::Config("iterations and batch sizes must be positive".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let segment_length = cfg.segment_length.unwrap_or_else(|| {
        DriftConfig::default_segment_length(cfg.iterations * cfg.train_batch)
    });
    let mut stream = DriftProcess::new(DriftConfig {
        difficulty: cfg.difficulty,
        bound: cfg.bound,
        segment_length,
        seed: seed::derive_named(cfg.seed, "stream"),
    })?;
    let params = *stream.params();
    let mut eval_rng = ChaCha8Rng::seed_from_u64(seed::derive_named(cfg.seed, "equilibrium"));
    let mut net = build_network(cfg.kind, seed::derive_named(cfg.seed, "init"))?;
    let mut adam = Adam::new(&net, cfg.learning_rate);

    let mut run = SupervisedRun {
        train_loss: Vec::with_capacity(cfg.iterations),
        eq_loss: Vec::with_capacity(cfg.iterations),
        diverged: false,
    };
    for _ in 0..cfg.iterations {
        let (xs, ys): (Vec<f64>, Vec<f64>) = (&mut stream).take(cfg.train_batch).unzip();
        let step = mse_and_gradient(&net, &column(xs.into_iter()), &ys)
            .and_then(|(loss, grads)| adam.step(&mut net, &grads).map(|_| loss));
        let test = drift::equilibrium_batch_with(cfg.test_batch, &params, &mut eval_rng);
        let (tx, ty): (Vec<f64>, Vec<f64>) = test.into_iter().unzip();
        let eq = step.and_then(|train| Ok((train, mse(&net, &column(tx.into_iter()), &ty)?)));
        match eq {
            Ok((train, eq)) if eq.is_finite() && eq <= DIVERGENCE_THRESHOLD => {
                run.train_loss.push(train);
                run.eq_loss.push(eq);
            }
            Ok(_) | Err(Error::NonFinite { .. }) => {
                run.diverged = true;
                run.train_loss.resize(cfg.iterations, f64::INFINITY);
                run.eq_loss.resize(cfg.iterations, f64::INFINITY);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(run)
}

/// One `(kind, difficulty, learning rate, seed)` run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub kind: NetworkKind,
    pub difficulty: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub run: SupervisedRun,
}

/// Best learning rate for one `(kind, difficulty)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: NetworkKind,
    pub difficulty: f64,
    pub best_learning_rate: f64,
    /// Mean final score across seeds at the best learning rate.
    pub mean_score: f64,
    /// Standard error of that mean.
    pub std_error: f64,
    /// Final score of every seed at the best learning rate.
    pub seed_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub kinds: Vec<NetworkKind>,
    pub difficulties: Vec<f64>,
    pub learning_rates: Vec<f64>,
    /// Per-network learning rates that replace `learning_rates`.
    pub learning_rate_overrides: BTreeMap<NetworkKind, Vec<f64>>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub train_batch: usize,
    pub test_batch: usize,
    pub bound: f64,
    pub segment_length: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kinds: vec![NetworkKind::Fta, NetworkKind::Relu],
            difficulties: (0..20).map(|i| 0.98 * i as f64 / 19.0).collect(),
            learning_rates: LEARNING_RATES.to_vec(),
            learning_rate_overrides: BTreeMap::new(),
            seeds: (0..10).collect(),
            iterations: 20_000,
            train_batch: 1,
            test_batch: 100,
            bound: 1.0,
            segment_length: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("kinds", self.kinds.is_empty()),
            ("difficulties", self.difficulties.is_empty()),
            ("learning_rates", self.learning_rates.is_empty()),
            (
                "learning_rate_overrides",
                self.learning_rate_overrides.values().any(Vec::is_empty),
            ),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("`{name}` must not be empty")));
            }
        }
        if self.difficulties.iter().any(|d| !(0.0..1.0).contains(d)) {
            return Err(Error::Config("difficulties must lie in [0, 1)".into()));
        }
        if self.iterations == 0 || self.train_batch == 0 || self.test_batch == 0 {
            return Err(Error::Config("iterations and batch sizes must be positive".into()));
        }
        Ok(())
    }

    /// Learning rates swept for `kind`.
    pub fn learning_rates_for(&self, kind: NetworkKind) -> &[f64] {
        self.learning_rate_overrides
            .get(&kind)
            .unwrap_or(&self.learning_rates)
    }

    /// Every run of the sweep, in output order.
    pub fn runs(&self) -> Vec<SupervisedRunConfig> {
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &difficulty in &self.difficulties {
                for &learning_rate in self.learning_rates_for(kind) {
                    for &seed in &self.seeds {
                        out.push(SupervisedRunConfig {
                            kind,
                            difficulty,
                            learning_rate,
                            iterations: self.iterations,
                            train_batch: self.train_batch,
                            test_batch: self.test_batch,
                            bound: self.bound,
                            segment_length: self.segment_length,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[cfg(feature = "parallel")]
fn execute(configs: &[SupervisedRunConfig]) -> Result<Vec<SupervisedRun>> {
    use rayon::prelude::*;
    configs.par_iter().map(run_supervised).collect()
}

#[cfg(not(feature = "parallel"))]
fn execute(configs: &[SupervisedRunConfig]) -> Result<Vec<SupervisedRun>> {
    configs.iter().map(run_supervised).collect()
}

/// Runs every configuration of `cfg` (in parallel with the `parallel`
/// feature) and keeps all curves.
pub fn sweep_runs(cfg: &SweepConfig) -> Result<Vec<SweepRun>> {
    cfg.validate()?;
    let configs = cfg.runs();
    let runs = execute(&configs)?;
    Ok(configs
        .into_iter()
        .zip(runs)
        .map(|(c, run)| SweepRun {
            kind: c.kind,
            difficulty: c.difficulty,
            learning_rate: c.learning_rate,
            seed: c.seed,
            run,
        })
        .collect())
}

/// Reduces runs to one row per `(kind, difficulty)`, choosing the learning
/// rate with the lowest mean final score. Diverged runs score infinity.
pub fn summarize(runs: &[SweepRun]) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut cells: Vec<(NetworkKind, f64)> = Vec::new();
    for r in runs {
        if !cells.contains(&(r.kind, r.difficulty)) {
            cells.push((r.kind, r.difficulty));
        }
    }
    for (kind, difficulty) in cells {
        let mut rates: Vec<f64> = Vec::new();
        for r in runs.iter().filter(|r| r.kind == kind && r.difficulty == difficulty) {
            if !rates.contains(&r.learning_rate) {
                rates.push(r.learning_rate);
            }
        }
        let best = rates
            .into_iter()
            .map(|lr| {
                let scores: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.kind == kind && r.difficulty == difficulty && r.learning_rate == lr)
                    .map(|r| r.run.final_score())
                    .collect();
                (lr, scores)
            })
            .min_by(|a, b| mean(&a.1).total_cmp(&mean(&b.1)))
            .expect("at least one learning rate");
        rows.push(SweepRow {
            kind,
            difficulty,
            best_learning_rate: best.0,
            mean_score: mean(&best.1),
            std_error: std_error(&best.1),
            seed_scores: best.1,
        });
    }
    rows
}

/// Sweep reduced to its best-learning-rate table.
pub fn difficulty_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    Ok(summarize(&sweep_runs(cfg)?))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation over `√n`.
pub fn std_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}
