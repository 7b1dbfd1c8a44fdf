use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::buffer::Batch;
use super::TrainError;
use crate::nn::{policy_backward, policy_sample, Adam, Checkpoint, Mlp, MlpSpec, LOG_STD_MAX, LOG_STD_MIN};

/// Observations are clipped to this magnitude after scaling.
pub const OBS_CLIP: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub gamma: f64,
    pub lr: f64,
    pub initial_alpha: f64,
    /// Defaults to `-action_dim`.
    pub target_entropy: Option<f64>,
    /// Freezes the temperature at this value instead of learning it.
    pub fixed_alpha: Option<f64>,
    pub tau: f64,
    pub twin_critics: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            batch_size: 256,
            gamma: 0.99,
            lr: 3e-4,
            initial_alpha: std::f64::consts::E,
            target_entropy: None,
            fixed_alpha: None,
            tau: 0.005,
            twin_critics: true,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.initial_alpha > 0.0 && self.initial_alpha.is_finite()) {
            return bad("initial alpha must be positive");
        }
        if self.fixed_alpha.is_some_and(|a| !(a >= 0.0 && a.is_finite())) {
            return bad("fixed alpha must be non-negative");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

/// Per-component observation scale for stacked frames of `(pose, wrench[, velocity])`.
pub fn default_obs_scale(history_len: usize, include_velocity: bool) -> Vec<f64> {
    let mut frame = vec![10.0, 10.0, 5.0, 0.1, 0.1, 1.0];
    if include_velocity {
        frame.extend_from_slice(&[1.0, 1.0, 0.5]);
    }
    frame.repeat(history_len)
}

pub fn scale_observation(obs: &[f64], scale: &[f64]) -> Vec<f64> {
    obs.iter().zip(scale).map(|(o, s)| (o * s).clamp(-OBS_CLIP, OBS_CLIP)).collect()
}

/// Result of one full update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
}

/// Actor output split into mean and raw log-std rows.
fn split_head(out: &[f64], act_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = Vec::with_capacity(out.len() / 2);
    let mut log_std = Vec::with_capacity(out.len() / 2);
    for row in out.chunks_exact(2 * act_dim) {
        mean.extend_from_slice(&row[..act_dim]);
        log_std.extend_from_slice(&row[act_dim..]);
    }
    (mean, log_std)
}

/// `[obs | action]` rows.
pub fn critic_input(obs: &[f64], action: &[f64], obs_dim: usize, act_dim: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(obs.len() + action.len());
    for (o, a) in obs.chunks_exact(obs_dim).zip(action.chunks_exact(act_dim)) {
        x.extend_from_slice(o);
        x.extend_from_slice(a);
    }
    x
}

/// Squashed samples for every row given standard-normal `noise`.
///
/// Returns `(actions, log_probs, per-row samples, raw log-std)`.
fn sample_rows(
    actor: &Mlp,
    out: &[f64],
    noise: &[f64],
    act_dim: usize,
) -> (Vec<f64>, Vec<f64>, Vec<crate::nn::PolicySample>, Vec<f64>) {
    debug_assert_eq!(actor.spec.output_dim, 2 * act_dim);
    let (mean, log_std) = split_head(out, act_dim);
    let rows = mean.len() / act_dim;
    let mut actions = Vec::with_capacity(mean.len());
    let mut logps = Vec::with_capacity(rows);
    let mut samples = Vec::with_capacity(rows);
    for r in 0..rows {
        let s = r * act_dim..(r + 1) * act_dim;
        let sample = policy_sample(&mean[s.clone()], &log_std[s.clone()], &noise[s]);
        actions.extend_from_slice(&sample.action);
        logps.push(sample.log_prob);
        samples.push(sample);
    }
    (actions, logps, samples, log_std)
}

/// Mean squared error of `critic(obs, action)` against `y` and its parameter gradient.
pub fn critic_loss_grad(critic: &Mlp, input: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let n = y.len();
    let cache = critic.forward(input, n).expect("critic input width");
    let q = cache.output();
    let mut loss = 0.0;
    let mut grad_out = Vec::with_capacity(n);
    for (qi, yi) in q.iter().zip(y) {
        let d = qi - yi;
        loss += d * d / n as f64;
        grad_out.push(2.0 * d / n as f64);
    }
    let (g, _) = critic.backward(&cache, &grad_out).expect("critic output width");
    (loss, g)
}

/// Loss `mean(alpha * log_pi(a|s) - min_i Q_i(s, a))` with `a` reparameterized by `noise`.
///
/// Returns `(loss, actor gradient, per-row log-probs)`.
pub fn actor_loss_grad(
    actor: &Mlp,
    critics: &[&Mlp],
    alpha: f64,
    obs: &[f64],
    noise: &[f64],
    act_dim: usize,
) -> (f64, Vec<f64>, Vec<f64>) {
    let obs_dim = actor.spec.input_dim;
    let n = obs.len() / obs_dim;
    let cache = actor.forward(obs, n).expect("actor input width");
    let (actions, logps, samples, raw_log_std) = sample_rows(actor, cache.output(), noise, act_dim);
    let input = critic_input(obs, &actions, obs_dim, act_dim);

    let caches: Vec<_> = critics.iter().map(|c| c.forward(&input, n).expect("critic input width")).collect();
    // index of the smallest critic per row
    let mut pick = vec![0usize; n];
    let mut q_min = vec![0.0; n];
    for r in 0..n {
        let (best, q) = caches
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.output()[r]))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        pick[r] = best;
        q_min[r] = q;
    }
    let loss = (0..n).map(|r| alpha * logps[r] - q_min[r]).sum::<f64>() / n as f64;

    // d loss / d action through the selected critic
    let mut dl_da = vec![0.0; n * act_dim];
    for (i, (critic, cache)) in critics.iter().zip(&caches).enumerate() {
        let grad_out: Vec<f64> = (0..n).map(|r| if pick[r] == i { -1.0 / n as f64 } else { 0.0 }).collect();
        if grad_out.iter().all(|g| *g == 0.0) {
            continue;
        }
        let (_, dx) = critic.backward(cache, &grad_out).expect("critic output width");
        for r in 0..n {
            let row = &dx[r * (obs_dim + act_dim) + obs_dim..(r + 1) * (obs_dim + act_dim)];
            for j in 0..act_dim {
                dl_da[r * act_dim + j] += row[j];
            }
        }
    }

    let mut grad_out = vec![0.0; n * 2 * act_dim];
    for r in 0..n {
        let s = r * act_dim..(r + 1) * act_dim;
        let (dm, dls) = policy_backward(&samples[r], &raw_log_std[s.clone()], &dl_da[s], alpha / n as f64);
        let row = &mut grad_out[r * 2 * act_dim..(r + 1) * 2 * act_dim];
        row[..act_dim].copy_from_slice(&dm);
        row[act_dim..].copy_from_slice(&dls);
    }
    let (g, _) = actor.backward(&cache, &grad_out).expect("actor output width");
    (loss, g, logps)
}

/// Temperature loss `-log_alpha * mean(log_pi + target_entropy)` and its gradient.
pub fn alpha_loss_grad(log_alpha: f64, log_probs: &[f64], target_entropy: f64) -> (f64, f64) {
    let m = log_probs.iter().map(|l| l + target_entropy).sum::<f64>() / log_probs.len().max(1) as f64;
    (-log_alpha * m, -m)
}

/// Actor, critics, targets, temperature and their optimizers.
#[derive(Clone, Debug)]
pub struct Sac {
    pub cfg: SacConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub obs_scale: Vec<f64>,
    pub actor: Mlp,
    pub critics: Vec<Mlp>,
    pub targets: Vec<Mlp>,
    pub log_alpha: f64,
    actor_opt: Adam,
    critic_opts: Vec<Adam>,
    alpha_opt: Adam,
    rng: ChaCha8Rng,
    pub updates: u64,
}

impl Sac {
    pub fn new(
        cfg: SacConfig,
        obs_dim: usize,
        act_dim: usize,
        obs_scale: Vec<f64>,
        seed: u64,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if obs_scale.len() != obs_dim {
            return Err(TrainError::InvalidConfig(format!(
                "observation scale has {} entries for {obs_dim} inputs",
                obs_scale.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor_spec = MlpSpec::new(obs_dim, cfg.hidden.clone(), 2 * act_dim)
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        let critic_spec = MlpSpec::new(obs_dim + act_dim, cfg.hidden.clone(), 1)
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        let actor = Mlp::init(actor_spec, &mut rng);
        let n_critics = if cfg.twin_critics { 2 } else { 1 };
        let critics: Vec<Mlp> = (0..n_critics).map(|_| Mlp::init(critic_spec.clone(), &mut rng)).collect();
        let targets = critics.clone();
        let log_alpha = cfg.fixed_alpha.map_or(cfg.initial_alpha.ln(), |a| a.ln());
        Ok(Self {
            actor_opt: Adam::new(actor.params.len(), cfg.lr),
            critic_opts: critics.iter().map(|c| Adam::new(c.params.len(), cfg.lr)).collect(),
            alpha_opt: Adam::new(1, cfg.lr),
            obs_dim,
            act_dim,
            obs_scale,
            actor,
            critics,
            targets,
            log_alpha,
            rng,
            updates: 0,
            cfg,
        })
    }

    pub fn alpha(&self) -> f64 {
        match self.cfg.fixed_alpha {
            Some(a) => a,
            None => self.log_alpha.exp(),
        }
    }

    pub fn target_entropy(&self) -> f64 {
        self.cfg.target_entropy.unwrap_or(-(self.act_dim as f64))
    }

    pub fn scale(&self, obs: &[f64]) -> Vec<f64> {
        scale_observation(obs, &self.obs_scale)
    }

    fn scale_rows(&self, obs: &[f64]) -> Vec<f64> {
        obs.chunks_exact(self.obs_dim).flat_map(|o| self.scale(o)).collect()
    }

    fn noise(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.sample(StandardNormal)).collect()
    }

    /// Deterministic action `tanh(mean)`.
    pub fn act_deterministic(&self, obs: &[f64]) -> Vec<f64> {
        let out = self.actor.predict(&self.scale(obs), 1).expect("observation width");
        out[..self.act_dim].iter().map(|m| m.tanh()).collect()
    }

    /// Stochastic action with caller-supplied randomness.
    pub fn act_stochastic<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Vec<f64> {
        sample_action(&self.actor, &self.obs_scale, obs, self.act_dim, rng)
    }

    /// Bootstrapped critic targets.
    pub fn critic_targets(&mut self, batch: &Batch) -> Vec<f64> {
        let n = batch.size;
        let next = self.scale_rows(&batch.next_obs);
        let noise = self.noise(n * self.act_dim);
        let out = self.actor.predict(&next, n).expect("observation width");
        let (actions, logps, _, _) = sample_rows(&self.actor, &out, &noise, self.act_dim);
        let input = critic_input(&next, &actions, self.obs_dim, self.act_dim);
        let qs: Vec<Vec<f64>> =
            self.targets.iter().map(|t| t.predict(&input, n).expect("critic input width")).collect();
        let alpha = self.alpha();
        (0..n)
            .map(|r| {
                let q = qs.iter().map(|q| q[r]).fold(f64::INFINITY, f64::min);
                batch.reward[r] + self.cfg.gamma * (1.0 - batch.terminal[r]) * (q - alpha * logps[r])
            })
            .collect()
    }

    pub fn critic_update(&mut self, batch: &Batch) -> Result<f64, TrainError> {
        let y = self.critic_targets(batch);
        let obs = self.scale_rows(&batch.obs);
        let input = critic_input(&obs, &batch.action, self.obs_dim, self.act_dim);
        let mut total = 0.0;
        for (critic, opt) in self.critics.iter_mut().zip(&mut self.critic_opts) {
            let (loss, g) = critic_loss_grad(critic, &input, &y);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite("critic loss"));
            }
            opt.step(&mut critic.params, &g);
            total += loss;
        }
        Ok(total / self.critics.len() as f64)
    }

    /// Returns `(actor loss, per-row log-probs)`.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<(f64, Vec<f64>), TrainError> {
        let obs = self.scale_rows(&batch.obs);
        let noise = self.noise(batch.size * self.act_dim);
        let critics: Vec<&Mlp> = self.critics.iter().collect();
        let (loss, g, logps) = actor_loss_grad(&self.actor, &critics, self.alpha(), &obs, &noise, self.act_dim);
        if !loss.is_finite() {
            return Err(TrainError::NonFinite("actor loss"));
        }
        self.actor_opt.step(&mut self.actor.params, &g);
        Ok((loss, logps))
    }

    pub fn alpha_update(&mut self, log_probs: &[f64]) -> Result<(), TrainError> {
        if self.cfg.fixed_alpha.is_some() {
            return Ok(());
        }
        let (_, g) = alpha_loss_grad(self.log_alpha, log_probs, self.target_entropy());
        let mut p = [self.log_alpha];
        self.alpha_opt.step(&mut p, &[g]);
        if !p[0].is_finite() {
            return Err(TrainError::NonFinite("log alpha"));
        }
        self.log_alpha = p[0];
        Ok(())
    }

    pub fn polyak(&mut self) {
        let tau = self.cfg.tau;
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.polyak_from(c, tau);
        }
    }

    /// Critic, actor, temperature and target updates on one minibatch.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats, TrainError> {
        let critic_loss = self.critic_update(batch)?;
        let (actor_loss, logps) = self.actor_update(batch)?;
        self.alpha_update(&logps)?;
        self.polyak();
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
            alpha: self.alpha(),
            entropy: -logps.iter().sum::<f64>() / logps.len().max(1) as f64,
        })
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn checkpoint(&self, history_len: usize, include_velocity: bool) -> Checkpoint {
        Checkpoint { history_len, include_velocity, obs_scale: self.obs_scale.clone(), actor: self.actor.clone() }
    }
}

/// One stochastic action from an actor snapshot.
pub fn sample_action<R: Rng + ?Sized>(
    actor: &Mlp,
    obs_scale: &[f64],
    obs: &[f64],
    act_dim: usize,
    rng: &mut R,
) -> Vec<f64> {
    let out = actor.predict(&scale_observation(obs, obs_scale), 1).expect("observation width");
    let noise: Vec<f64> = (0..act_dim).map(|_| rng.sample(StandardNormal)).collect();
    policy_sample(&out[..act_dim], &out[act_dim..], &noise).action
}

/// Deterministic action from an actor snapshot.
pub fn mean_action(actor: &Mlp, obs_scale: &[f64], obs: &[f64], act_dim: usize) -> Vec<f64> {
    let out = actor.predict(&scale_observation(obs, obs_scale), 1).expect("observation width");
    out[..act_dim].iter().map(|m| m.tanh()).collect()
}

/// Mean of the clamped log-std outputs over a batch; for diagnostics.
pub fn mean_log_std(actor: &Mlp, obs_scaled: &[f64], act_dim: usize) -> f64 {
    let n = obs_scaled.len() / actor.spec.input_dim;
    let out = actor.predict(obs_scaled, n).expect("observation width");
    let (_, ls) = split_head(&out, act_dim);
    ls.iter().map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX)).sum::<f64>() / ls.len() as f64
}
