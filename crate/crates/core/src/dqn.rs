//! DQN with experience replay, ε-greedy exploration and an optional target
//! network.
//!
//! The Q-network is `obs → 64 ReLU → head → linear(actions)`, where the head
//! is one of [`HeadKind`]. Each environment step after warm-up triggers one
//! Adam step on the mean squared TD error of a replay minibatch.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{EnvName, Environment};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{self, MetricRecord, Pairing};
use crate::net::{Activation, ActivationPenalty, Adam, DenseNet, LayerSpec, RbfConfig};
use crate::seed;
use crate::tiling::TilingConfig;

/// Representation layer between the first hidden layer and the Q output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Relu,
    Tanh,
    /// Fuzzy tiling on `[-20, 20]` with `δ = η = 2`: 64 units, 1280 features.
    Fta,
    /// Gaussian bumps on the FTA cutoffs with bandwidth 2.
    Rbf,
    /// 1280 ReLU units with an L1 activation penalty.
    L1,
    /// 1280 ReLU units with an L2 activation penalty.
    L2,
    /// 1280 ReLU units.
    ReluLarge,
}

impl HeadKind {
    pub const ALL: [HeadKind; 7] = [
        HeadKind::Relu,
        HeadKind::Tanh,
        HeadKind::Fta,
        HeadKind::Rbf,
        HeadKind::L1,
        HeadKind::L2,
        HeadKind::ReluLarge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Relu => "relu",
            HeadKind::Tanh => "tanh",
            HeadKind::Fta => "fta",
            HeadKind::Rbf => "rbf",
            HeadKind::L1 => "l1",
            HeadKind::L2 => "l2",
            HeadKind::ReluLarge => "relu_large",
        }
    }
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        HeadKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || (s == "large" && *k == HeadKind::ReluLarge))
            .ok_or_else(|| Error::Config(format!("unknown head `{s}`")))
    }
}

/// Which parameters enter the interference statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceScope {
    #[default]
    All,
    /// Weights and bias of the head layer only.
    SecondLayer,
}

/// Measurements taken at every evaluation checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricToggles {
    pub sparsity: bool,
    pub interference: bool,
    pub grad_sparsity: bool,
    pub pairing: Pairing,
    pub interference_scope: InterferenceScope,
    /// States drawn from replay per measurement.
    pub samples: usize,
}

impl Default for MetricToggles {
    fn default() -> Self {
        Self {
            sparsity: true,
            interference: false,
            grad_sparsity: true,
            pairing: Pairing::Disjoint,
            interference_scope: InterferenceScope::All,
            samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment steps of uniformly random behaviour before learning starts.
    pub warmup: usize,
    pub epsilon_train: f64,
    pub epsilon_eval: f64,
    /// Train steps between target-network syncs; `None` bootstraps from the
    /// online network.
    pub target_sync_every: Option<usize>,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub hidden: usize,
    pub head: HeadKind,
    pub fta: TilingConfig,
    pub rbf_bandwidth: f64,
    /// Weight of the L1/L2 activation penalty.
    pub penalty_weight: f64,
    /// Weight of the out-of-bound penalty on FTA pre-activations.
    pub boundary_penalty: f64,
    pub metrics: MetricToggles,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 1e-4,
            batch_size: 64,
            buffer_capacity: 100_000,
            warmup: 5000,
            epsilon_train: 0.1,
            epsilon_eval: 0.05,
            target_sync_every: None,
            eval_every: 1000,
            eval_episodes: 5,
            hidden: 64,
            head: HeadKind::Fta,
            fta: TilingConfig::new(-20.0, 20.0, 2.0, 2.0).expect("valid tiling"),
            rbf_bandwidth: 2.0,
            penalty_weight: 0.01,
            boundary_penalty: 0.0,
            metrics: MetricToggles::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch_size must be positive and fit in the buffer");
        }
        if self.eval_every == 0 || self.hidden == 0 {
            return bad("eval_every and hidden must be positive");
        }
        if self.target_sync_every == Some(0) {
            return bad("target_sync_every must be positive when set");
        }
        if !(0.0..=1.0).contains(&self.epsilon_train) || !(0.0..=1.0).contains(&self.epsilon_eval) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.metrics.samples < 2 {
            return bad("metrics.samples must be at least 2");
        }
        Ok(())
    }
}

/// Builds the Q-network for `head`.
pub fn build_q_network(cfg: &DqnConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<DenseNet> {
    let h = cfg.hidden;
    let wide = h * cfg.fta.bins();
    let head = match cfg.head {
        HeadKind::Relu => LayerSpec::new(h, h, Activation::Relu),
        HeadKind::Tanh => LayerSpec::new(h, h, Activation::Tanh),
        HeadKind::Fta => LayerSpec::new(h, h, Activation::Fta(cfg.fta))
            .with_boundary_penalty(cfg.boundary_penalty),
        HeadKind::Rbf => LayerSpec::new(
            h,
            h,
            Activation::Rbf(RbfConfig::on_tiling(&cfg.fta, cfg.rbf_bandwidth)?),
        ),
        HeadKind::L1 => LayerSpec::new(h, wide, Activation::Relu)
            .with_penalty(ActivationPenalty::L1(cfg.penalty_weight)),
        HeadKind::L2 => LayerSpec::new(h, wide, Activation::Relu)
            .with_penalty(ActivationPenalty::L2(cfg.penalty_weight)),
        HeadKind::ReluLarge => LayerSpec::new(h, wide, Activation::Relu),
    };
    let width = head.output_width();
    DenseNet::new(
        vec![
            LayerSpec::new(obs_dim, h, Activation::Relu),
            head,
            LayerSpec::new(width, n_actions, Activation::Linear),
        ],
        seed,
    )
}

/// Index of the representation layer.
pub const HEAD_LAYER: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for terminal transitions; truncation still bootstraps.
    pub done: bool,
}

/// Fixed-capacity ring buffer with uniform minibatch sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Stores `t`, overwriting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Indices of `n` distinct stored transitions, uniformly at random.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n).into_vec()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        self.sample_indices(n, rng)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy action: uniform with probability `epsilon`, otherwise greedy.
pub fn act<R: Rng + ?Sized>(net: &DenseNet, obs: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    let n_actions = net.output_dim();
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..n_actions));
    }
    let q = net.predict(&Matrix::row_vector(obs))?;
    Ok(argmax(q.row(0)))
}

fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Result<Matrix> {
    let rows: Vec<&[f64]> = rows.collect();
    Matrix::from_rows(&rows)
}

/// `y = r + γ·max_a' Q_ref(s', a')·(1 - done)`, where `Q_ref` is the target
/// network if given and the online network otherwise.
pub fn td_targets(
    batch: &[&Transition],
    net: &DenseNet,
    target: Option<&DenseNet>,
    gamma: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Shape("empty minibatch".into()));
    }
    let reference = target.unwrap_or(net);
    let next = stack(batch.iter().map(|t| t.next_state.as_slice()))?;
    let q_next = reference.predict(&next)?;
    Ok(batch
        .iter()
        .zip(q_next.iter_rows())
        .map(|(t, q)| {
            if t.done {
                t.reward
            } else {
                t.reward + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect())
}

/// Squared TD error of `batch` plus activation penalties, and the gradient
/// of that loss.
fn td_loss_and_gradient(
    net: &DenseNet,
    batch: &[&Transition],
    targets: &[f64],
) -> Result<(f64, crate::net::Gradients)> {
    let states = stack(batch.iter().map(|t| t.state.as_slice()))?;
    let (q, tape) = net.forward(&states)?;
    let n = batch.len() as f64;
    let mut d_out = Matrix::zeros(q.rows(), q.cols());
    let mut loss = 0.0;
    for (r, (t, y)) in batch.iter().zip(targets).enumerate() {
        if t.action >= q.cols() {
            return Err(Error::InvalidAction {
                action: t.action,
                n_actions: q.cols(),
            });
        }
        let err = q.get(r, t.action) - y;
        loss += err * err / n;
        d_out.set(r, t.action, 2.0 * err / n);
    }
    loss += net.penalty(&tape);
    let grads = net.backward(&tape, &d_out)?;
    Ok((loss, grads))
}

/// Learner state: online network, optional target network, optimiser and
/// replay.
#[derive(Debug, Clone)]
pub struct Agent {
    cfg: DqnConfig,
    net: DenseNet,
    target: Option<DenseNet>,
    adam: Adam,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    train_steps: usize,
}

impl Agent {
    pub fn new(cfg: DqnConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let net = build_q_network(&cfg, obs_dim, n_actions, seed::derive_named(seed, "init"))?;
        let target = cfg.target_sync_every.map(|_| net.clone());
        let adam = Adam::new(&net, cfg.learning_rate);
        Ok(Self {
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            rng: ChaCha8Rng::seed_from_u64(seed::derive_named(seed, "agent")),
            cfg,
            net,
            target,
            adam,
            train_steps: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn target_net(&self) -> Option<&DenseNet> {
        self.target.as_ref()
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn train_steps(&self) -> usize {
        self.train_steps
    }

    /// Whether enough experience has been collected to learn.
    pub fn warmed_up(&self) -> bool {
        self.buffer.len() >= self.cfg.warmup.max(self.cfg.batch_size)
    }

    /// Behaviour action: uniform before warm-up, ε-greedy afterwards.
    pub fn behave(&mut self, obs: &[f64]) -> Result<usize> {
        if !self.warmed_up() {
            return Ok(self.rng.random_range(0..self.net.output_dim()));
        }
        act(&self.net, obs, self.cfg.epsilon_train, &mut self.rng)
    }

    pub fn observe(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One Adam step on a replay minibatch. Returns `None` without touching
    /// any parameter while the agent is still warming up.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        if !self.warmed_up() {
            return Ok(None);
        }
        let batch = self.buffer.sample(self.cfg.batch_size, &mut self.rng);
        let targets = td_targets(&batch, &self.net, self.target.as_ref(), self.cfg.gamma)?;
        let (loss, grads) = td_loss_and_gradient(&self.net, &batch, &targets)?;
        self.adam.step(&mut self.net, &grads)?;
        self.train_steps += 1;
        if let (Some(every), Some(target)) = (self.cfg.target_sync_every, self.target.as_mut()) {
            if self.train_steps.is_multiple_of(every) {
                target.copy_params_from(&self.net);
            }
        }
        Ok(Some(loss))
    }

    /// Sparsity, interference and gradient-sparsity measurements on states
    /// drawn from replay with `seed`.
    pub fn measure(&self, seed: u64) -> Result<MetricRecord> {
        let mut record = MetricRecord::default();
        let m = &self.cfg.metrics;
        if self.buffer.len() < 2 {
            return Ok(record);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = m.samples;
        let first = self.buffer.sample(n, &mut rng);
        if m.sparsity {
            let second = self.buffer.sample(n, &mut rng);
            let a = self.net.features(&stack(first.iter().map(|t| t.state.as_slice()))?, HEAD_LAYER)?;
            let b = self.net.features(&stack(second.iter().map(|t| t.state.as_slice()))?, HEAD_LAYER)?;
            record.instance_sparsity = metrics::instance_sparsity(&a);
            record.overlap_sparsity = metrics::overlap_sparsity(&a, &b)?;
            if record.instance_sparsity > 0.0 {
                record.ratio = Some(record.overlap_sparsity / record.instance_sparsity);
            }
        }
        if m.grad_sparsity || m.interference {
            let targets = td_targets(&first, &self.net, self.target.as_ref(), self.cfg.gamma)?;
            if m.grad_sparsity {
                let (_, grads) = td_loss_and_gradient(&self.net, &first, &targets)?;
                record.grad_sparsity_layer2 =
                    Some(metrics::gradient_sparsity(grads.layers[HEAD_LAYER].weights.as_slice()));
                record.grad_sparsity_total = Some(metrics::gradient_sparsity(&grads.flatten()));
            }
            if m.interference && first.len() >= 2 {
                let per_sample = first
                    .iter()
                    .zip(&targets)
                    .map(|(t, y)| {
                        let (_, g) = td_loss_and_gradient(&self.net, &[*t], &[*y])?;
                        Ok(match m.interference_scope {
                            InterferenceScope::All => g.flatten(),
                            InterferenceScope::SecondLayer => g.flatten_layer(HEAD_LAYER),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let stats = metrics::interference(&per_sample, m.pairing)?;
                record.m1 = Some(stats.m1);
                record.m2 = Some(stats.m2);
                record.m3 = Some(stats.m3);
            }
        }
        Ok(record)
    }
}

/// Mean return of `n_episodes` ε-greedy episodes. Episode `i` resets the
/// environment with `derive(seed, i)` and explores with its own stream.
pub fn evaluate(
    net: &DenseNet,
    env: &mut dyn Environment,
    n_episodes: usize,
    epsilon: f64,
    seed: u64,
) -> Result<f64> {
    if n_episodes == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ep in 0..n_episodes as u64 {
        let ep_seed = seed::derive(seed, ep);
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_named(ep_seed, "policy"));
        let mut obs = env.reset(ep_seed).observation;
        loop {
            let a = act(net, &obs, epsilon, &mut rng)?;
            let r = env.step(a)?;
            total += r.reward;
            if r.episode_over() {
                break;
            }
            obs = r.observation;
        }
    }
    Ok(total / n_episodes as f64)
}

/// Trains an agent on `env` for `total_steps` environment steps, evaluating
/// every `eval_every` steps. `on_record` sees each row as it is produced.
pub fn run_with(
    cfg: &DqnConfig,
    env_name: EnvName,
    total_steps: usize,
    seed: u64,
    mut on_record: impl FnMut(&MetricRecord),
) -> Result<Vec<MetricRecord>> {
    let mut env = env_name.make();
    let mut eval_env = env_name.make();
    let mut agent = Agent::new(cfg.clone(), env.observation_dim(), env.n_actions(), seed)?;
    let episode_lane = seed::derive_named(seed, "episodes");
    let eval_lane = seed::derive_named(seed, "evaluation");
    let metric_lane = seed::derive_named(seed, "metrics");

    let mut records = Vec::with_capacity(total_steps / cfg.eval_every);
    let mut episode = 0u64;
    let mut obs = env.reset(seed::derive(episode_lane, episode)).observation;
    for step in 1..=total_steps {
        let action = agent.behave(&obs)?;
        let r = env.step(action)?;
        agent.observe(Transition {
            state: std::mem::take(&mut obs),
            action,
            reward: r.reward,
            next_state: r.observation.clone(),
            done: r.done,
        });
        obs = r.observation;
        if r.done || r.truncated {
            episode += 1;
            obs = env.reset(seed::derive(episode_lane, episode)).observation;
        }
        agent.train_step()?;
        if !agent.net.is_finite() {
            return Err(Error::NonFinite {
                layer: 0,
                what: "parameters after an update".into(),
            });
        }

        if step % cfg.eval_every == 0 {
            let checkpoint = (step / cfg.eval_every) as u64;
            let ret = evaluate(
                &agent.net,
                eval_env.as_mut(),
                cfg.eval_episodes,
                cfg.epsilon_eval,
                seed::derive(eval_lane, checkpoint),
            )?;
            let mut record = agent.measure(seed::derive(metric_lane, checkpoint))?;
            record.step = step;
            record.episodic_return = Some(ret);
            on_record(&record);
            records.push(record);
        }
    }
    Ok(records)
}

pub fn run(cfg: &DqnConfig, env_name: EnvName, total_steps: usize, seed: u64) -> Result<Vec<MetricRecord>> {
    run_with(cfg, env_name, total_steps, seed, |_| {})
}
