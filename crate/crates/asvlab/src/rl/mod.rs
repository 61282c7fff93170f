//! Actor/critic networks, advantage estimation and the policy-optimization
//! training loop.
//!
//! Everything here is built for one fixed architecture family: two separate
//! fully-connected trunks (policy and value) with two tanh hidden layers,
//! a diagonal-Gaussian action head with state-independent log standard
//! deviations, and exact reverse-mode gradients written out by hand. All
//! arithmetic is `f64` and every source of randomness is an explicit
//! counter-based stream, so training runs are reproducible bit for bit.

mod adapter;
mod checkpoint;
mod gae;
mod net;
mod ppo;

pub use adapter::{normalized_to_control, VesselTrainEnv};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError};
pub use gae::compute_gae;
pub use net::{
    entropy, log_prob, sample_action, FeatureScaling, Linear, Mlp, PolicyValueNet,
};
pub use ppo::{
    clipped_surrogate_term, evaluate_loss, metrics_csv_header, metrics_csv_row, Adam,
    IterationStats, LossReport, Minibatch, TrainError, TrainEnv, TrainStep, Trainer,
};

/// Optimization hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PPOConfig {
    /// Reward discount.
    pub gamma: f64,
    /// Advantage estimation decay.
    pub gae_lambda: f64,
    /// Probability-ratio clip half-width.
    pub clip_eps: f64,
    /// Value loss weight.
    pub c1: f64,
    /// Entropy bonus weight.
    pub c2: f64,
    pub learning_rate: f64,
    /// Steps each worker rolls per iteration (T).
    pub rollout_len: usize,
    /// Parallel rollout workers (N_A).
    pub n_workers: usize,
    /// Samples per gradient update (N_MB).
    pub minibatch_size: usize,
    /// Passes over the pool per iteration (N_E).
    pub n_epochs: usize,
    /// Total environment steps to train for (K).
    pub total_steps: u64,
    /// Normalize advantages within each minibatch.
    pub normalize_advantages: bool,
}

impl Default for PPOConfig {
    fn default() -> Self {
        PPOConfig {
            gamma: 0.999,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            c1: 0.5,
            c2: 0.01,
            learning_rate: 2e-4,
            rollout_len: 1024,
            n_workers: 8,
            minibatch_size: 32,
            n_epochs: 10,
            total_steps: 1_000_000,
            normalize_advantages: true,
        }
    }
}

impl PPOConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.gae_lambda >= 0.0 && self.gae_lambda <= 1.0) {
            return Err(TrainError::InvalidConfig(
                "gamma must lie in (0, 1] and gae_lambda in [0, 1]".into(),
            ));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(TrainError::InvalidConfig("clip_eps must lie in (0, 1)".into()));
        }
        if self.learning_rate < 0.0 {
            return Err(TrainError::InvalidConfig("learning_rate must be non-negative".into()));
        }
        if self.rollout_len == 0 || self.n_workers == 0 || self.minibatch_size == 0 || self.n_epochs == 0 {
            return Err(TrainError::InvalidConfig(
                "rollout_len, n_workers, minibatch_size and n_epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}
