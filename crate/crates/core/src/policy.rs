//! The interface every evaluated controller implements, and the learned policy.

use thiserror::Error;

use crate::env::{EnvConfig, InsertionEnv};
use crate::nn::Checkpoint;
use crate::sac::mean_action;

pub trait Policy {
    fn name(&self) -> String;
    /// Called after every reset with a seed private to the episode.
    fn begin_episode(&mut self, _seed: u64) {}
    fn act(&mut self, env: &InsertionEnv, obs: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error(
        "checkpoint expects observations of width {expected} (history {history}, velocity {velocity}), \
         config produces {got}"
    )]
    ObservationMismatch { expected: usize, got: usize, history: usize, velocity: bool },
    #[error("checkpoint actor emits {0} outputs, expected 6")]
    ActionMismatch(usize),
}

/// Deterministic `tanh(mean)` actions from a trained actor.
#[derive(Clone, Debug)]
pub struct LearnedPolicy {
    pub checkpoint: Checkpoint,
    label: String,
}

impl LearnedPolicy {
    pub fn new(checkpoint: Checkpoint, label: impl Into<String>) -> Self {
        Self { checkpoint, label: label.into() }
    }

    /// Rejects configs whose observation layout differs from the checkpoint's.
    pub fn check_compatible(&self, cfg: &EnvConfig) -> Result<(), PolicyError> {
        let ck = &self.checkpoint;
        let expected = ck.actor.spec.input_dim;
        if ck.history_len != cfg.history_len
            || ck.include_velocity != cfg.include_velocity
            || expected != cfg.observation_dim()
        {
            return Err(PolicyError::ObservationMismatch {
                expected,
                got: cfg.observation_dim(),
                history: ck.history_len,
                velocity: ck.include_velocity,
            });
        }
        if ck.actor.spec.output_dim != 6 {
            return Err(PolicyError::ActionMismatch(ck.actor.spec.output_dim));
        }
        Ok(())
    }
}

impl Policy for LearnedPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&mut self, _env: &InsertionEnv, obs: &[f64]) -> Vec<f64> {
        mean_action(&self.checkpoint.actor, &self.checkpoint.obs_scale, obs, 3)
    }
}
