use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// PPO and training-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    /// Surrogate clip range.
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: u32,
    /// Truncated-BPTT chunk length, control steps.
    pub sequence_length: usize,
    /// Chunks per minibatch.
    pub minibatch_sequences: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub mirror_weight: f64,
    /// Environment steps collected per iteration.
    pub batch_steps: usize,
    pub max_iterations: u32,
    /// Evaluate every this many iterations (0 disables).
    pub eval_every: u32,
    pub eval_episodes: u32,
    pub checkpoint_every: u32,
    pub max_grad_norm: f64,
    /// Parallel rollout workers.
    pub workers: usize,
    /// Stop once the evaluation mean episode length reaches this many seconds.
    pub target_eval_seconds: Option<f64>,
    /// Stop once the evaluation single-contact rate reaches this value.
    pub target_single_contact: Option<f64>,
    /// Wall-clock budget in seconds; checked between iterations.
    pub time_budget_s: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 3e-4,
            epochs: 4,
            sequence_length: 200,
            minibatch_sequences: 8,
            entropy_coef: 0.0,
            value_coef: 0.5,
            mirror_weight: 1.0,
            batch_steps: 16_000,
            max_iterations: 500,
            eval_every: 5,
            eval_episodes: 20,
            checkpoint_every: 25,
            max_grad_norm: 1.0,
            workers: 8,
            target_eval_seconds: None,
            target_single_contact: None,
            time_budget_s: None,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0) {
            return Err(invalid("clip must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(invalid("gamma and lambda must lie in (0, 1]"));
        }
        if !(self.mirror_weight >= 0.0) || !(self.entropy_coef >= 0.0) || !(self.value_coef >= 0.0)
        {
            return Err(invalid("loss weights must be non-negative"));
        }
        if !(self.learning_rate >= 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(invalid("learning rate must be >= 0 and max_grad_norm > 0"));
        }
        if self.epochs == 0
            || self.sequence_length == 0
            || self.minibatch_sequences == 0
            || self.batch_steps == 0
        {
            return Err(invalid(
                "epochs, sequence length, minibatch size and batch size must be positive",
            ));
        }
        if self.workers == 0 {
            return Err(invalid("need at least one rollout worker"));
        }
        Ok(())
    }
}
