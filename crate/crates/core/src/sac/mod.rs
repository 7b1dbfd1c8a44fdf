//! Soft Actor-Critic: replay buffer, twin critics with target networks, learned temperature
//! and the collect/update loop.

mod agent;
mod buffer;
mod train;

pub use agent::{
    actor_loss_grad, alpha_loss_grad, critic_input, critic_loss_grad, default_obs_scale, mean_action, mean_log_std,
    sample_action, scale_observation, Sac, SacConfig, UpdateStats, OBS_CLIP,
};
pub use buffer::{Batch, BufferError, DoneKind, ReplayBuffer, Transition};
pub use train::{
    train, write_metrics_csv, EnvStep, Environment, IterationMetrics, TrainConfig, TrainOutcome, TrainingEnv,
    METRICS_HEADER,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("environment error: {0}")]
    Env(String),
    #[error(transparent)]
    Buffer(#[from] BufferError),
}
