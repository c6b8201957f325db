//! Classic-control environments with the episode limits used for DQN.

mod cartpole;
mod mountain_car;

pub use cartpole::CartPole;
pub use mountain_car::MountainCar;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Observation plus episode bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub steps: usize,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// The episode reached a terminal state; no bootstrapping past it.
    pub done: bool,
    /// The episode hit its step limit without terminating.
    pub truncated: bool,
}

impl StepResult {
    pub fn episode_over(&self) -> bool {
        self.done || self.truncated
    }
}

pub trait Environment: Send {
    fn observation_dim(&self) -> usize;
    fn n_actions(&self) -> usize;
    /// Maximum number of steps in an episode.
    fn step_limit(&self) -> usize;
    /// Starts a new episode from a seeded initial state.
    fn reset(&mut self, seed: u64) -> EnvState;
    fn step(&mut self, action: usize) -> Result<StepResult>;
    fn state(&self) -> EnvState;
}

/// Environments available to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    MountainCar,
    CartPole,
}

impl EnvName {
    pub fn make(self) -> Box<dyn Environment> {
        match self {
            EnvName::MountainCar => Box::new(MountainCar::new()),
            EnvName::CartPole => Box::new(CartPole::new()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::MountainCar => "mountain_car",
            EnvName::CartPole => "cart_pole",
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mountain_car" | "mountaincar" => Ok(EnvName::MountainCar),
            "cart_pole" | "cartpole" => Ok(EnvName::CartPole),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

fn check_action(action: usize, n_actions: usize) -> Result<()> {
    if action >= n_actions {
        Err(Error::InvalidAction { action, n_actions })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in [EnvName::MountainCar, EnvName::CartPole] {
            assert_eq!(name.as_str().parse::<EnvName>().unwrap(), name);
        }
        assert_eq!("MountainCar".parse::<EnvName>().unwrap(), EnvName::MountainCar);
        assert!("lunar_lander".parse::<EnvName>().is_err());
    }
}
