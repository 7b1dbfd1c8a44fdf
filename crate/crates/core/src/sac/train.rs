use std::collections::VecDeque;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{sample_action, Sac, SacConfig};
use super::buffer::{DoneKind, ReplayBuffer, Transition};
use super::TrainError;
use crate::env::{Curriculum, InsertionEnv, ResetOptions, Termination};
use crate::nn::Mlp;

/// Result of one environment step as seen by the trainer.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub success: bool,
}

/// What the trainer needs from an environment.
pub trait Environment: Send {
    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Starts an episode; `iteration` drives any curriculum.
    fn reset(&mut self, seed: u64, iteration: u64) -> Result<Vec<f64>, String>;
    fn step(&mut self, action: &[f64]) -> Result<EnvStep, String>;
    /// Target-noise fraction in effect at `iteration`, for logging.
    fn noise_fraction(&self, _iteration: u64) -> f64 {
        0.0
    }
}

/// Insertion environment with a noise curriculum on top of fixed reset options.
#[derive(Clone, Debug)]
pub struct TrainingEnv {
    pub env: InsertionEnv,
    pub curriculum: Curriculum,
    pub reset: ResetOptions,
}

impl Environment for TrainingEnv {
    fn observation_dim(&self) -> usize {
        self.env.observation_dim()
    }

    fn action_dim(&self) -> usize {
        3
    }

    fn reset(&mut self, seed: u64, iteration: u64) -> Result<Vec<f64>, String> {
        let opts = ResetOptions { noise_fraction: self.curriculum.fraction(iteration), ..self.reset };
        self.env.reset(seed, &opts).map_err(|e| e.to_string())
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep, String> {
        let r = self.env.step(action).map_err(|e| e.to_string())?;
        Ok(EnvStep {
            success: r.terminated == Termination::Success,
            terminated: r.terminated != Termination::None,
            truncated: r.truncated,
            reward: r.reward,
            observation: r.observation,
        })
    }

    fn noise_fraction(&self, iteration: u64) -> f64 {
        self.curriculum.fraction(iteration)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub sac: SacConfig,
    pub iterations: u64,
    /// Uniform-random steps collected before the first update.
    pub prefill_steps: usize,
    /// Steps collected per iteration, summed over workers.
    pub env_steps_per_iteration: usize,
    pub updates_per_iteration: usize,
    pub workers: usize,
    pub buffer_capacity: usize,
    /// Completed episodes averaged for the return and success columns.
    pub metrics_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sac: SacConfig::default(),
            iterations: 5000,
            prefill_steps: 5000,
            env_steps_per_iteration: 140,
            updates_per_iteration: 50,
            workers: 4,
            buffer_capacity: 1 << 20,
            metrics_window: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.sac.validate()?;
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.workers == 0 {
            return bad("at least one worker is required".into());
        }
        if self.iterations > 0 && self.sac.batch_size > self.prefill_steps {
            return bad(format!("batch size {} exceeds prefill steps {}", self.sac.batch_size, self.prefill_steps));
        }
        if self.buffer_capacity < self.sac.batch_size {
            return bad("replay buffer smaller than one batch".into());
        }
        Ok(())
    }
}

pub const METRICS_HEADER: &str =
    "iteration,env_steps,episodes,mean_return,success_rate,critic_loss,actor_loss,alpha,epsilon_frac";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub env_steps: u64,
    pub episodes: u64,
    /// Over the last `metrics_window` completed episodes; NaN before the first one.
    pub mean_return: f64,
    pub success_rate: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub epsilon_frac: f64,
}

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.env_steps,
            self.episodes,
            self.mean_return,
            self.success_rate,
            self.critic_loss,
            self.actor_loss,
            self.alpha,
            self.epsilon_frac
        )
    }
}

pub fn write_metrics_csv(w: &mut impl Write, rows: &[IterationMetrics]) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

struct EpisodeEnd {
    ret: f64,
    success: bool,
}

/// One collection worker with a private environment and RNG.
struct Worker<E> {
    env: E,
    rng: ChaCha8Rng,
    obs: Option<Vec<f64>>,
    ret: f64,
}

impl<E: Environment> Worker<E> {
    fn collect(
        &mut self,
        steps: usize,
        policy: Option<(&Mlp, &[f64])>,
        iteration: u64,
    ) -> Result<(Vec<Transition>, Vec<EpisodeEnd>), TrainError> {
        let act_dim = self.env.action_dim();
        let mut out = Vec::with_capacity(steps);
        let mut ends = Vec::new();
        while out.len() < steps {
            let obs = match self.obs.take() {
                Some(o) => o,
                None => {
                    self.ret = 0.0;
                    let seed = self.rng.random::<u64>();
                    self.env.reset(seed, iteration).map_err(TrainError::Env)?
                }
            };
            let action: Vec<f64> = match policy {
                Some((actor, scale)) => sample_action(actor, scale, &obs, act_dim, &mut self.rng),
                None => (0..act_dim).map(|_| self.rng.random_range(-1.0..=1.0)).collect(),
            };
            let step = self.env.step(&action).map_err(TrainError::Env)?;
            self.ret += step.reward;
            let done = if step.terminated {
                DoneKind::Terminal
            } else if step.truncated {
                DoneKind::Truncated
            } else {
                DoneKind::None
            };
            if done == DoneKind::None {
                self.obs = Some(step.observation.clone());
            } else {
                ends.push(EpisodeEnd { ret: self.ret, success: step.success });
            }
            out.push(Transition {
                observation: obs,
                action,
                reward: step.reward,
                next_observation: step.observation,
                done,
            });
        }
        Ok((out, ends))
    }
}

/// Collects from every worker, in parallel when there are several, merging in worker order.
type Batch = (Vec<Transition>, Vec<EpisodeEnd>);

fn collect_all<E: Environment>(
    workers: &mut [Worker<E>],
    total: usize,
    policy: Option<(&Mlp, &[f64])>,
    iteration: u64,
) -> Result<Vec<Batch>, TrainError> {
    let per = total.div_ceil(workers.len());
    if workers.len() == 1 {
        return Ok(vec![workers[0].collect(per, policy, iteration)?]);
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = workers.iter_mut().map(|w| s.spawn(move || w.collect(per, policy, iteration))).collect();
        handles.into_iter().map(|h| h.join().expect("collection worker panicked")).collect()
    })
}

struct Tally {
    env_steps: u64,
    episodes: u64,
    window: usize,
    recent: VecDeque<EpisodeEnd>,
}

impl Tally {
    fn absorb(
        &mut self,
        batches: Vec<(Vec<Transition>, Vec<EpisodeEnd>)>,
        buffer: &mut ReplayBuffer,
    ) -> Result<(), TrainError> {
        for (transitions, ends) in batches {
            for t in &transitions {
                buffer.push(t)?;
            }
            self.env_steps += transitions.len() as u64;
            self.episodes += ends.len() as u64;
            for e in ends {
                if self.recent.len() == self.window {
                    self.recent.pop_front();
                }
                self.recent.push_back(e);
            }
        }
        Ok(())
    }

    /// Mean return and success rate over the window.
    fn summary(&self) -> (f64, f64) {
        if self.recent.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let n = self.recent.len() as f64;
        (
            self.recent.iter().map(|e| e.ret).sum::<f64>() / n,
            self.recent.iter().filter(|e| e.success).count() as f64 / n,
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub agent: Sac,
    pub metrics: Vec<IterationMetrics>,
    pub prefill_episodes: u64,
    pub env_steps: u64,
}

/// Prefills with uniform-random actions, then alternates collection and updates.
///
/// `make_env(worker)` builds each worker's environment; `on_iteration` sees every metrics
/// row as it is produced. Fully reproducible from `seed` for any worker count.
pub fn train<E: Environment>(
    make_env: impl Fn(usize) -> E,
    cfg: &TrainConfig,
    obs_scale: Vec<f64>,
    seed: u64,
    mut on_iteration: impl FnMut(&IterationMetrics, &Sac),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut workers: Vec<Worker<E>> = (0..cfg.workers)
        .map(|i| Worker { env: make_env(i), rng: ChaCha8Rng::seed_from_u64(seeder.random()), obs: None, ret: 0.0 })
        .collect();
    let obs_dim = workers[0].env.observation_dim();
    let act_dim = workers[0].env.action_dim();
    let mut agent = Sac::new(cfg.sac.clone(), obs_dim, act_dim, obs_scale, seeder.random())?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, obs_dim, act_dim);

    let mut tally = Tally { env_steps: 0, episodes: 0, window: cfg.metrics_window.max(1), recent: VecDeque::new() };
    if cfg.prefill_steps > 0 {
        let batches = collect_all(&mut workers, cfg.prefill_steps, None, 0)?;
        tally.absorb(batches, &mut buffer)?;
    }
    let prefill_episodes = tally.episodes;

    let mut metrics = Vec::with_capacity(cfg.iterations as usize);
    for iteration in 0..cfg.iterations {
        let actor = agent.actor.clone();
        let scale = agent.obs_scale.clone();
        let batches = collect_all(&mut workers, cfg.env_steps_per_iteration, Some((&actor, &scale)), iteration)?;
        tally.absorb(batches, &mut buffer)?;

        let (mut critic_loss, mut actor_loss) = (0.0, 0.0);
        for _ in 0..cfg.updates_per_iteration {
            let batch = buffer.sample(cfg.sac.batch_size, agent.rng_mut())?;
            let stats = agent.update(&batch)?;
            critic_loss += stats.critic_loss;
            actor_loss += stats.actor_loss;
        }
        let n_upd = cfg.updates_per_iteration.max(1) as f64;
        let (mean_return, success_rate) = tally.summary();
        let row = IterationMetrics {
            iteration,
            env_steps: tally.env_steps,
            episodes: tally.episodes,
            mean_return,
            success_rate,
            critic_loss: critic_loss / n_upd,
            actor_loss: actor_loss / n_upd,
            alpha: agent.alpha(),
            epsilon_frac: workers[0].env.noise_fraction(iteration),
        };
        on_iteration(&row, &agent);
        metrics.push(row);
    }
    Ok(TrainOutcome { agent, metrics, prefill_episodes, env_steps: tally.env_steps })
}
