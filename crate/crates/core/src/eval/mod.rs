//! Evaluation protocol, reports, episode logs and the ablation grid.

mod ablation;
mod log;
mod svg;

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    BlockerPlacement, Curriculum, EnvConfig, EnvError, InsertionEnv, ResetOptions, StartMode, Termination,
};
use crate::nn::CheckpointError;
use crate::policy::{Policy, PolicyError};
use crate::sac::{default_obs_scale, train, IterationMetrics, Sac, TrainConfig, TrainError, TrainOutcome, TrainingEnv};

pub use ablation::{default_grid, run_ablation, AblationRow, AblationVariant, ABLATION_CSV_HEADER};
pub use log::{
    group_episodes, parse_records, read_episodes, replay_episode, write_record, EpisodeHeader, InitialConditions,
    LogRecord, LoggedEpisode, ReplayCheck, StepRecord,
};
pub use svg::render_episode_svg;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("episode log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("invalid protocol: {0}")]
    Protocol(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub slots: Vec<usize>,
    pub trials_per_slot: usize,
    pub blocker: BlockerPlacement,
    pub start: StartMode,
    pub noise_fraction: f64,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            slots: vec![0, 1, 2],
            trials_per_slot: 4,
            blocker: BlockerPlacement::None,
            start: StartMode::Region,
            noise_fraction: 1.0,
            seed: 0,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self, cfg: &EnvConfig) -> Result<(), EvalError> {
        if self.trials_per_slot == 0 {
            return Err(EvalError::Protocol("trials_per_slot must be at least 1".into()));
        }
        if self.slots.is_empty() {
            return Err(EvalError::Protocol("no slots to evaluate".into()));
        }
        if let Some(s) = self.slots.iter().find(|&&s| s >= cfg.layout.n_slots) {
            return Err(EvalError::Protocol(format!("slot {s} out of range for {} slots", cfg.layout.n_slots)));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(EvalError::Protocol("noise_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn episodes(&self) -> usize {
        self.slots.len() * self.trials_per_slot
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Jam,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub slot: usize,
    pub trial: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: usize,
    /// Largest low-level contact force norm seen, newtons.
    pub peak_force: f64,
    #[serde(rename = "return")]
    pub episode_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub build: String,
    pub seed: u64,
    pub protocol: EvalProtocol,
    pub config: EnvConfig,
    pub episodes: Vec<EpisodeSummary>,
    /// Success fraction across slots, one entry per trial index.
    pub per_trial_success: Vec<f64>,
    pub success_mean: f64,
    pub success_std: f64,
}

impl EvalReport {
    pub fn success_count(&self) -> usize {
        self.episodes.iter().filter(|e| e.outcome == Outcome::Success).count()
    }

    pub fn success_rate(&self) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        self.success_count() as f64 / self.episodes.len() as f64
    }
}

/// Mean and sample (n - 1) standard deviation; a single value has std 0.
pub fn aggregate(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Per-trial-index success fractions from `(trial, success)` pairs.
pub fn per_trial_rates(trials: usize, results: &[(usize, bool)]) -> Vec<f64> {
    let mut hits = vec![0usize; trials];
    let mut total = vec![0usize; trials];
    for &(t, ok) in results {
        total[t] += 1;
        hits[t] += ok as usize;
    }
    hits.iter().zip(&total).map(|(&h, &n)| if n == 0 { 0.0 } else { h as f64 / n as f64 }).collect()
}

/// Runs one episode per (trial, slot) pair, trial-major. Seeds come from a single stream
/// seeded by `protocol.seed`, so identical inputs give identical reports and logs.
pub fn run_evaluation(
    cfg: &EnvConfig,
    protocol: &EvalProtocol,
    policy: &mut dyn Policy,
    mut log: Option<&mut dyn Write>,
    build: &str,
) -> Result<EvalReport, EvalError> {
    protocol.validate(cfg)?;
    let mut env = InsertionEnv::new(cfg.clone())?;
    let mut seeds = ChaCha8Rng::seed_from_u64(protocol.seed);
    let name = policy.name();
    let mut episodes = Vec::with_capacity(protocol.episodes());
    let mut id = 0u64;
    for trial in 0..protocol.trials_per_slot {
        for &slot in &protocol.slots {
            let seed: u64 = seeds.random();
            let policy_seed: u64 = seeds.random();
            let opts = ResetOptions {
                noise_fraction: protocol.noise_fraction,
                target_slot: Some(slot),
                blocker: protocol.blocker,
                start: protocol.start,
            };
            let mut obs = env.reset(seed, &opts)?;
            policy.begin_episode(policy_seed);
            if let Some(w) = log.as_deref_mut() {
                let header = EpisodeHeader {
                    episode: id,
                    slot,
                    trial,
                    seed,
                    policy: name.clone(),
                    build: build.to_string(),
                    initial: InitialConditions::of(&env),
                    config: cfg.clone(),
                };
                write_record(w, &LogRecord::Header(Box::new(header)))?;
            }
            let (mut steps, mut peak, mut ret) = (0usize, 0.0f64, 0.0);
            let outcome = loop {
                let action = policy.act(&env, &obs);
                let r = env.step(&action)?;
                if let Some(w) = log.as_deref_mut() {
                    write_record(w, &LogRecord::Step(StepRecord::new(id, steps, &action, &r)))?;
                }
                steps += 1;
                peak = peak.max(r.info.peak_force);
                ret += r.reward;
                match r.terminated {
                    Termination::Success => break Outcome::Success,
                    Termination::Jam => break Outcome::Jam,
                    Termination::None if r.truncated => break Outcome::Timeout,
                    Termination::None => {}
                }
                obs = r.observation;
            };
            episodes.push(EpisodeSummary {
                episode: id,
                slot,
                trial,
                seed,
                outcome,
                steps,
                peak_force: peak,
                episode_return: ret,
            });
            id += 1;
        }
    }
    let pairs: Vec<(usize, bool)> = episodes.iter().map(|e| (e.trial, e.outcome == Outcome::Success)).collect();
    let per_trial = per_trial_rates(protocol.trials_per_slot, &pairs);
    let (mean, std) = aggregate(&per_trial);
    Ok(EvalReport {
        policy: name,
        build: build.to_string(),
        seed: protocol.seed,
        protocol: protocol.clone(),
        config: cfg.clone(),
        episodes,
        per_trial_success: per_trial,
        success_mean: mean,
        success_std: std,
    })
}

/// Everything needed to train an insertion policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSetup {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub curriculum: Curriculum,
}

impl TrainSetup {
    pub fn new(env: EnvConfig, train: TrainConfig) -> Self {
        let curriculum = Curriculum::default_for(train.iterations);
        Self { env, train, curriculum }
    }
}

/// Trains on the insertion task with sampled blockers and starts.
pub fn train_insertion(
    setup: &TrainSetup,
    seed: u64,
    on_iteration: impl FnMut(&IterationMetrics, &Sac),
) -> Result<TrainOutcome, EvalError> {
    setup.env.validate()?;
    let proto = InsertionEnv::new(setup.env.clone())?;
    let make =
        |_| TrainingEnv { env: proto.clone(), curriculum: setup.curriculum.clone(), reset: ResetOptions::default() };
    let scale = default_obs_scale(setup.env.history_len, setup.env.include_velocity);
    Ok(train(make, &setup.train, scale, seed, on_iteration)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_sample_std() {
        let (m, s) = aggregate(&[1.0, 1.0, 2.0 / 3.0, 2.0 / 3.0]);
        assert!((m - 0.833_333_333_333).abs() < 1e-9);
        assert!((s - 0.192_450_089_729).abs() < 1e-9);
        assert_eq!(aggregate(&[0.5]), (0.5, 0.0));
        assert_eq!(aggregate(&[1.0; 4]), (1.0, 0.0));
    }

    #[test]
    fn per_trial_grouping() {
        let r = per_trial_rates(2, &[(0, true), (0, false), (1, true), (1, true)]);
        assert_eq!(r, vec![0.5, 1.0]);
    }

    #[test]
    fn protocol_validation() {
        let cfg = EnvConfig::default();
        let mut p = EvalProtocol::default();
        assert!(p.validate(&cfg).is_ok());
        p.trials_per_slot = 0;
        assert!(p.validate(&cfg).is_err());
        p.trials_per_slot = 1;
        p.slots = vec![3];
        assert!(p.validate(&cfg).is_err());
    }
}
