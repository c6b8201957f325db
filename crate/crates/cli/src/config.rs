//! Experiment configuration files.
//!
//! One TOML file holds a section per command. Every field has a default, so an
//! empty file is valid; unknown keys are rejected. The resolved configuration
//! (after `--desk-scale` and command-line overrides) is written next to the
//! results and its SHA-256 tags every CSV.

use std::collections::BTreeMap;
use std::path::Path;

use fta_core::dqn::{DqnConfig, HeadKind};
use fta_core::env::EnvName;
use fta_core::supervised::{NetworkKind, SweepConfig};
use fta_core::TilingConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output: OutputConfig,
    pub supervised: SweepConfig,
    pub rl: RlConfig,
    pub grid: GridConfig,
    pub activation: ActivationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Keep every n-th iteration of supervised learning curves.
    pub curve_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { curve_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub env: EnvName,
    pub variants: Vec<HeadKind>,
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    /// Out-of-bound penalty weights tried for FTA variants. Empty keeps
    /// `agent.boundary_penalty`.
    pub boundary_penalties: Vec<f64>,
    pub agent: DqnConfig,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            env: EnvName::MountainCar,
            variants: vec![HeadKind::Fta, HeadKind::Relu],
            seeds: (0..10).collect(),
            total_steps: 300_000,
            boundary_penalties: Vec::new(),
            agent: DqnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub env: EnvName,
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    /// Range the tiling must cover; widened when a tile width does not divide it.
    pub lower: f64,
    pub upper: f64,
    pub etas: Vec<f64>,
    pub tile_widths: Vec<f64>,
    pub agent: DqnConfig,
}

/// `0.8 / 2^i` for `i = 0..9`.
pub fn halving_grid() -> Vec<f64> {
    (0..9).map(|i| 0.8 / f64::powi(2.0, i)).collect()
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            env: EnvName::MountainCar,
            seeds: (0..5).collect(),
            total_steps: 300_000,
            lower: -1.0,
            upper: 1.0,
            etas: halving_grid(),
            tile_widths: halving_grid(),
            agent: DqnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActivationConfig {
    pub tiling: TilingConfig,
    pub points: usize,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self {
            tiling: TilingConfig::new(0.0, 1.0, 0.25, 0.1).expect("valid tiling"),
            points: 2001,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the serialized configuration.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Shrinks every budget to something a laptop finishes in minutes.
    pub fn desk_scale(&mut self) {
        let s = &mut self.supervised;
        s.iterations = 5000;
        s.difficulties = vec![0.0, 0.5, 0.98];
        s.seeds = (0..3).collect();
        let relu = vec![5e-3, 1e-3, 5e-4, 1e-4];
        s.learning_rate_overrides = BTreeMap::from([
            (NetworkKind::Fta, vec![1e-3, 5e-4, 1e-4, 5e-5]),
            (NetworkKind::Relu, relu.clone()),
            (NetworkKind::ReluLarge, relu),
        ]);
        self.rl.total_steps = 150_000;
        self.grid.total_steps = 30_000;
        self.grid.seeds = vec![0];
    }

    /// Replaces the seed list of every section.
    pub fn set_seeds(&mut self, seeds: &[u64]) {
        self.supervised.seeds = seeds.to_vec();
        self.rl.seeds = seeds.to_vec();
        self.grid.seeds = seeds.to_vec();
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.output.curve_every == 0 {
            return usage("output.curve_every must be positive".into());
        }
        self.supervised.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        for (name, agent) in [("rl", &self.rl.agent), ("grid", &self.grid.agent)] {
            agent
                .validate()
                .map_err(|e| CliError::Usage(format!("{name}.agent: {e}")))?;
        }
        if self.rl.variants.is_empty() || self.rl.seeds.is_empty() || self.rl.total_steps == 0 {
            return usage("rl needs variants, seeds and a positive step budget".into());
        }
        if self.grid.seeds.is_empty() || self.grid.total_steps == 0 {
            return usage("grid needs seeds and a positive step budget".into());
        }
        if self.grid.etas.is_empty() || self.grid.tile_widths.is_empty() {
            return usage("grid needs etas and tile_widths".into());
        }
        if self.activation.points < 2 {
            return usage("activation.points must be at least 2".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.desk_scale();
        cfg.rl.agent.target_sync_every = Some(100);
        cfg.rl.boundary_penalties = vec![0.0, 0.5];
        let back = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ExperimentConfig::parse("[supervised]\nlearning_rate = 0.1\n").is_err());
        assert!(ExperimentConfig::parse("bogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("[rl]\nvariants = [\"cnn\"]\n").is_err());
    }

    #[test]
    fn rejects_inconsistent_tilings() {
        let bad = "[activation.tiling]\nlower = 0.0\nupper = 1.0\nbins = 4\ntile_width = 0.3\n";
        assert!(ExperimentConfig::parse(bad).is_err());
        let ok = "[activation.tiling]\nlower = 0.0\nupper = 1.0\ntile_width = 0.25\n";
        let cfg = ExperimentConfig::parse(ok).unwrap();
        assert_eq!(cfg.activation.tiling.bins(), 4);
        assert_eq!(cfg.activation.tiling.eta(), 0.25);
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.supervised.iterations += 1;
        assert_eq!(a.hash().len(), 64);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn default_grid_halves_from_point_eight() {
        let g = halving_grid();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], 0.8);
        for w in g.windows(2) {
            assert_eq!(w[1], w[0] / 2.0);
        }
    }
}
