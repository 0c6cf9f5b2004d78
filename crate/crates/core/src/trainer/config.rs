use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::losses::LossWeights;
use crate::minidoom::{EpisodeMode, RewardProfile, Role};
use crate::netcore::NetworkConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub workers: usize,
    /// Environment steps per update.
    pub rollout: usize,
    /// Global environment-step budget.
    pub steps: u64,
    /// Global steps between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { workers: 4, rollout: 20, steps: 500_000, checkpoint_interval: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Linear decay of the learning rate to 0 over the step budget.
    pub anneal: bool,
    pub decay: f64,
    pub epsilon: f64,
    /// Global-norm clip; 0 disables.
    pub clip_norm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { learning_rate: 7e-4, anneal: true, decay: 0.99, epsilon: 0.1, clip_norm: 40.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub capacity: usize,
    /// Length of the replayed sequence for value replay and pixel control.
    pub sequence: usize,
    pub rp_batch: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig { capacity: crate::replay::DEFAULT_CAPACITY, sequence: 20, rp_batch: 2 }
    }
}

/// Everything one training run needs. Serialized as TOML with `[schedule]`, `[optimizer]`,
/// `[losses]` and `[replay]` sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub role: Role,
    /// Network profile name: `paper`, `small` or `tiny`.
    pub network: String,
    /// Map files; worker `i` plays map `i % maps.len()`.
    pub maps: Vec<PathBuf>,
    pub episode_mode: EpisodeMode,
    /// Overrides each map's episode step limit.
    pub step_limit: Option<u32>,
    /// Overrides the role's reward profile.
    pub reward: Option<RewardProfile>,
    pub schedule: Schedule,
    pub optimizer: OptimizerConfig,
    pub losses: LossWeights,
    pub replay: ReplayConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            role: Role::Navigation,
            network: "small".into(),
            maps: Vec::new(),
            episode_mode: EpisodeMode::UntilDeath,
            step_limit: None,
            reward: None,
            schedule: Schedule::default(),
            optimizer: OptimizerConfig::default(),
            losses: LossWeights::default(),
            replay: ReplayConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<TrainConfig, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }

    pub fn network_config(&self) -> Result<NetworkConfig, TrainError> {
        NetworkConfig::profile(&self.network, self.role.action_count())
            .ok_or_else(|| TrainError::Config(format!("unknown network profile {:?}", self.network)))
    }

    pub fn profile(&self) -> RewardProfile {
        self.reward.unwrap_or_else(|| self.role.profile())
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let net = self.network_config()?;
        net.geometry().map_err(|e| TrainError::Config(e.to_string()))?;
        self.losses.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        let s = &self.schedule;
        if s.workers == 0 {
            return Err(TrainError::Config("schedule.workers must be at least 1".into()));
        }
        if s.rollout == 0 || s.rollout > net.unroll {
            return Err(TrainError::Config(format!("schedule.rollout must be in 1..={}", net.unroll)));
        }
        let r = &self.replay;
        if r.sequence == 0 || r.sequence > net.unroll || r.capacity == 0 || r.rp_batch == 0 {
            return Err(TrainError::Config(format!(
                "replay needs capacity > 0, rp_batch > 0 and sequence in 1..={}",
                net.unroll
            )));
        }
        let o = &self.optimizer;
        if !(o.epsilon > 0.0) || !(0.0..=1.0).contains(&o.decay) || !(o.learning_rate >= 0.0) || !(o.clip_norm >= 0.0) {
            return Err(TrainError::Config("optimizer needs epsilon > 0, decay in [0, 1], lr >= 0, clip_norm >= 0".into()));
        }
        if self.step_limit == Some(0) {
            return Err(TrainError::Config("step_limit must be positive".into()));
        }
        Ok(())
    }
}
