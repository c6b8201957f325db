use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, EnvState, Environment, StepResult};
use crate::error::Result;

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const STEP_LIMIT: usize = 2000;

/// Under-powered car in a valley; actions are push left, no push, push right.
/// Reward is -1 per step until the car reaches `x ≥ 0.5`.
#[derive(Debug, Clone)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    steps: usize,
    done: bool,
}

impl MountainCar {
    pub fn new() -> Self {
        Self {
            position: -0.5,
            velocity: 0.0,
            steps: 0,
            done: false,
        }
    }

    /// Places the car at an arbitrary state; used by regression tests.
    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
        self.done = false;
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for MountainCar {
    fn observation_dim(&self) -> usize {
        2
    }

    fn n_actions(&self) -> usize {
        3
    }

    fn step_limit(&self) -> usize {
        STEP_LIMIT
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.position = rng.random_range(-0.6..-0.4);
        self.velocity = 0.0;
        self.steps = 0;
        self.done = false;
        self.state()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        check_action(action, 3)?;
        self.velocity += (action as f64 - 1.0) * FORCE - (3.0 * self.position).cos() * GRAVITY;
        self.velocity = self.velocity.clamp(-MAX_SPEED, MAX_SPEED);
        self.position += self.velocity;
        self.position = self.position.clamp(MIN_POSITION, MAX_POSITION);
        if self.position == MIN_POSITION && self.velocity < 0.0 {
            self.velocity = 0.0;
        }
        self.steps += 1;
        let done = self.position >= GOAL_POSITION;
        self.done = done;
        Ok(StepResult {
            observation: vec![self.position, self.velocity],
            reward: -1.0,
            done,
            truncated: !done && self.steps >= STEP_LIMIT,
        })
    }

    fn state(&self) -> EnvState {
        EnvState {
            observation: vec![self.position, self.velocity],
            steps: self.steps,
            done: self.done,
        }
    }
}
