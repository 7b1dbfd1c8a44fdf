//! The insertion MDP: noisy goal, delayed residual actions, stacked haptic observations,
//! shaped reward and the success / jam / horizon episode lifecycle.

mod config;
mod observation;
mod reward;

pub use config::{curriculum_epsilon, Curriculum, EnvConfig, RewardConfig};
pub use observation::{build_observation, Frame, History};
pub use reward::{action_change_norms, min_step_reward, reward, reward_terms, RewardEvents, RewardTerms};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se2::{compose, pose_error_norms, relative_pose, Pose2, Twist2, Wrench2};
use crate::sim::{spawn_world, BodyState, PlateShape, SimError, Simulator, WorldGeometry};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("step called on a finished episode; call reset first")]
    EpisodeOver,
    #[error("action must have 3 finite components, got {0:?}")]
    BadAction(Vec<f64>),
    #[error("slot {0} does not exist")]
    BadSlot(usize),
}

/// Why an episode ended, if it did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    #[default]
    None,
    Success,
    Jam,
}

/// Where the blocking object goes at reset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockerPlacement {
    #[default]
    None,
    /// In the target slot.
    TargetSlot,
    Slot(usize),
    /// In the target slot with probability `EnvConfig::blocker_prob`.
    Sampled,
}

/// How the initial body pose is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Partial insertion with probability `partial_insert_prob`, else the start region.
    #[default]
    Sampled,
    /// Plate in the true slot at the given depth fraction (uniform if `None`); in a free
    /// neighbouring slot when the target slot is blocked.
    PartialInsert { depth_fraction: Option<f64> },
    /// Uniform pose in the start region above the noisy goal.
    Region,
    /// Start region height, but directly above the noisy goal with its heading.
    Centered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetOptions {
    /// Fraction of the full target noise half-range.
    pub noise_fraction: f64,
    /// `None` picks a slot uniformly.
    pub target_slot: Option<usize>,
    pub blocker: BlockerPlacement,
    pub start: StartMode,
}

impl Default for ResetOptions {
    fn default() -> Self {
        Self { noise_fraction: 1.0, target_slot: None, blocker: BlockerPlacement::Sampled, start: StartMode::Sampled }
    }
}

impl ResetOptions {
    /// Training reset at `iteration` of the noise curriculum.
    pub fn training(iteration: u64, curriculum: &Curriculum) -> Self {
        Self { noise_fraction: curriculum.fraction(iteration), ..Self::default() }
    }
}

/// Everything that changes during an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    pub body: BodyState,
    pub noisy_goal: Pose2,
    pub true_goal: Pose2,
    /// Goal perturbation: `noisy_goal = true_goal * noise`.
    pub noise: Pose2,
    pub target_slot: usize,
    pub blocker_slot: Option<usize>,
    pub step_count: usize,
    pub success_counter: usize,
    pub jam_counter: usize,
    pub prev_action: [f64; 3],
    pub active_target: Pose2,
    pub history: History,
    /// Contact wrench of the latest capture.
    pub wrench: Wrench2,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub delay: usize,
    pub pose: Pose2,
    /// Composite target applied during this step.
    pub target: Pose2,
    pub wrench: Wrench2,
    pub contact_count: usize,
    pub wrench_norm: f64,
    /// Largest contact force magnitude over the low-level steps of this policy step.
    pub peak_force: f64,
    pub max_penetration: f64,
    pub dist_to_true_goal: f64,
    pub rot_to_true_goal: f64,
    pub in_success_region: bool,
    pub strict_success: bool,
    pub success_counter: usize,
    pub jam_counter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terms: RewardTerms,
    pub terminated: Termination,
    pub truncated: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated != Termination::None || self.truncated
    }
}

/// Composite target: base motion towards the noisy goal plus the residual action,
/// combined by clamped addition in normalized action space.
pub fn compose_target(current: Pose2, noisy_goal: Pose2, action: [f64; 3], cfg: &EnvConfig) -> Pose2 {
    let scales = cfg.action_scales();
    let err = relative_pose(current, noisy_goal).to_array();
    let mut step = [0.0; 3];
    for i in 0..3 {
        let base = (err[i] / scales[i]).clamp(-1.0, 1.0);
        let composite = (action[i].clamp(-1.0, 1.0) + base).clamp(-1.0, 1.0);
        step[i] = composite * scales[i];
    }
    compose(current, Pose2::new(step[0], step[1], step[2]))
}

/// Normalized base motion towards the noisy goal, per axis in `[-1, 1]`.
pub fn base_action(current: Pose2, noisy_goal: Pose2, cfg: &EnvConfig) -> [f64; 3] {
    let scales = cfg.action_scales();
    let err = relative_pose(current, noisy_goal).to_array();
    [0, 1, 2].map(|i| (err[i] / scales[i]).clamp(-1.0, 1.0))
}

/// Point halfway between the two lowest plate corners.
pub fn plate_bottom_center(pose: Pose2, shape: &PlateShape) -> [f64; 2] {
    let mut c = shape.corners(pose);
    c.sort_by(|a, b| a[1].total_cmp(&b[1]));
    [(c[0][0] + c[1][0]) / 2.0, c[0][1]]
}

/// Whether the plate sits inside any slot.
pub fn in_success_region(pose: Pose2, world: &WorldGeometry, cfg: &EnvConfig) -> bool {
    let bottom = plate_bottom_center(pose, &cfg.plate);
    let deep_enough = bottom[1] < world.slot_top_z - cfg.success_depth;
    let centered = world.nearest_slot(bottom[0]).is_some_and(|(_, dx)| dx.abs() < cfg.success_dx);
    deep_enough && centered
}

/// Updates the consecutive in-region counter.
///
/// Returns `(in_region, new_counter, episode_success)`.
pub fn check_success(pose: Pose2, world: &WorldGeometry, counter: usize, cfg: &EnvConfig) -> (bool, usize, bool) {
    let inside = in_success_region(pose, world, cfg);
    let counter = if inside { (counter + 1).min(cfg.success_hold) } else { 0 };
    (inside, counter, counter >= cfg.success_hold)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    None,
    Jam,
    Horizon,
}

/// Jam if the last `jam_hold` low-level force magnitudes all exceed `jam_force`;
/// otherwise horizon once `step_count` reaches the episode length.
pub fn check_failure(force_history: &[f64], step_count: usize, cfg: &EnvConfig) -> Failure {
    let n = force_history.len();
    if n >= cfg.jam_hold && force_history[n - cfg.jam_hold..].iter().all(|f| *f > cfg.jam_force) {
        return Failure::Jam;
    }
    if step_count >= cfg.horizon {
        return Failure::Horizon;
    }
    Failure::None
}

/// End-effector pose with the plate fully seated in `slot`.
pub fn seated_pose(slot: usize, world: &WorldGeometry, shape: &PlateShape) -> Pose2 {
    let plate_center = Pose2::new(world.slot_centers_x[slot], world.slot_floor_z + shape.half_height, 0.0);
    shape.ee_pose(plate_center)
}

fn symmetric(rng: &mut ChaCha8Rng, half_range: f64) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0) * half_range
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Insertion environment with its own RNG stream.
#[derive(Clone, Debug)]
pub struct InsertionEnv {
    cfg: EnvConfig,
    sim: Simulator,
    episode: EpisodeState,
    rng: ChaCha8Rng,
}

impl InsertionEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let world = spawn_world(&cfg.layout, &cfg.plate, None)?;
        let goal = seated_pose(0, &world, &cfg.plate);
        let sim = Simulator::new(cfg.plate, world, cfg.sim, BodyState::at(goal))?;
        let episode = EpisodeState {
            body: BodyState::at(goal),
            noisy_goal: goal,
            true_goal: goal,
            noise: Pose2::IDENTITY,
            target_slot: 0,
            blocker_slot: None,
            step_count: 0,
            success_counter: 0,
            jam_counter: 0,
            prev_action: [0.0; 3],
            active_target: goal,
            history: History::new(cfg.history_len),
            wrench: Wrench2::ZERO,
            done: true,
        };
        Ok(Self { cfg, sim, episode, rng: ChaCha8Rng::seed_from_u64(0) })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn episode(&self) -> &EpisodeState {
        &self.episode
    }

    pub fn world(&self) -> &WorldGeometry {
        &self.sim.world
    }

    pub fn observation_dim(&self) -> usize {
        self.cfg.observation_dim()
    }

    /// Starts a new episode. The RNG stream is re-seeded from `seed`.
    pub fn reset(&mut self, seed: u64, opts: &ResetOptions) -> Result<Vec<f64>, EnvError> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &self.cfg;
        let n_slots = cfg.layout.n_slots;
        let target_slot = match opts.target_slot {
            Some(s) if s >= n_slots => return Err(EnvError::BadSlot(s)),
            Some(s) => s,
            None => self.rng.random_range(0..n_slots),
        };
        let blocker_slot = match opts.blocker {
            BlockerPlacement::None => None,
            BlockerPlacement::TargetSlot => Some(target_slot),
            BlockerPlacement::Slot(s) if s >= n_slots => return Err(EnvError::BadSlot(s)),
            BlockerPlacement::Slot(s) => Some(s),
            BlockerPlacement::Sampled => (self.rng.random::<f64>() < cfg.blocker_prob).then_some(target_slot),
        };
        let world = spawn_world(&cfg.layout, &cfg.plate, blocker_slot)?;

        let frac = opts.noise_fraction.clamp(0.0, 1.0);
        let (eps_t, eps_r) = (frac * cfg.eps_trans_max, frac * cfg.eps_rot_max);
        let noise = Pose2::new(
            symmetric(&mut self.rng, eps_t),
            symmetric(&mut self.rng, eps_t),
            symmetric(&mut self.rng, eps_r),
        );
        let true_goal = seated_pose(target_slot, &world, &cfg.plate);
        let noisy_goal = compose(true_goal, noise);

        let start = match opts.start {
            StartMode::Sampled => {
                if self.rng.random::<f64>() < cfg.partial_insert_prob {
                    StartMode::PartialInsert { depth_fraction: None }
                } else {
                    StartMode::Region
                }
            }
            other => other,
        };
        let lift = cfg.plate.ee_height_above_bottom();
        let pose = match start {
            StartMode::PartialInsert { depth_fraction } => {
                let u = match depth_fraction {
                    Some(u) => u.clamp(0.0, 1.0),
                    None => self.rng.random::<f64>(),
                };
                let depth = world.slot_top_z - world.slot_floor_z;
                let seat = if blocker_slot == Some(target_slot) {
                    // the target slot is occupied: start in a free neighbour instead
                    let free: Vec<usize> = [target_slot.wrapping_sub(1), target_slot + 1]
                        .into_iter()
                        .filter(|s| *s < n_slots && Some(*s) != blocker_slot)
                        .collect();
                    match free.len() {
                        0 => None,
                        n => Some(seated_pose(free[self.rng.random_range(0..n)], &world, &cfg.plate)),
                    }
                } else {
                    Some(true_goal)
                };
                match seat {
                    Some(g) => Pose2::new(g.x, g.z + (1.0 - u) * depth, g.theta),
                    None => {
                        let h = uniform(&mut self.rng, cfg.start_height_min, cfg.start_height_max);
                        Pose2::new(noisy_goal.x, world.slot_top_z + h + lift, noisy_goal.theta)
                    }
                }
            }
            StartMode::Region => {
                let dx = symmetric(&mut self.rng, cfg.start_x_half_range);
                let h = uniform(&mut self.rng, cfg.start_height_min, cfg.start_height_max);
                let dr = symmetric(&mut self.rng, cfg.start_rot_half_range);
                Pose2::new(noisy_goal.x + dx, world.slot_top_z + h + lift, noisy_goal.theta + dr)
            }
            StartMode::Centered => {
                let h = uniform(&mut self.rng, cfg.start_height_min, cfg.start_height_max);
                Pose2::new(noisy_goal.x, world.slot_top_z + h + lift, noisy_goal.theta)
            }
            StartMode::Sampled => unreachable!("resolved above"),
        };

        self.sim = Simulator::new(cfg.plate, world, cfg.sim, BodyState::at(pose))?;
        let first = Frame { rel_pose: relative_pose(noisy_goal, pose), wrench: Wrench2::ZERO, velocity: Twist2::ZERO };
        let mut history = History::new(cfg.history_len);
        history.reset(first);
        self.episode = EpisodeState {
            body: BodyState::at(pose),
            noisy_goal,
            true_goal,
            noise,
            target_slot,
            blocker_slot,
            step_count: 0,
            success_counter: 0,
            jam_counter: 0,
            prev_action: [0.0; 3],
            active_target: pose,
            history,
            wrench: Wrench2::ZERO,
            done: false,
        };
        Ok(self.observation())
    }

    /// Starts an episode from explicit initial conditions (used for log replay).
    pub fn reset_to(
        &mut self,
        target_slot: usize,
        blocker_slot: Option<usize>,
        noise: Pose2,
        start: Pose2,
    ) -> Result<Vec<f64>, EnvError> {
        let n_slots = self.cfg.layout.n_slots;
        if target_slot >= n_slots {
            return Err(EnvError::BadSlot(target_slot));
        }
        let world = spawn_world(&self.cfg.layout, &self.cfg.plate, blocker_slot)?;
        let true_goal = seated_pose(target_slot, &world, &self.cfg.plate);
        let noisy_goal = compose(true_goal, noise);
        self.sim = Simulator::new(self.cfg.plate, world, self.cfg.sim, BodyState::at(start))?;
        let mut history = History::new(self.cfg.history_len);
        history.reset(Frame {
            rel_pose: relative_pose(noisy_goal, start),
            wrench: Wrench2::ZERO,
            velocity: Twist2::ZERO,
        });
        self.episode = EpisodeState {
            body: BodyState::at(start),
            noisy_goal,
            true_goal,
            noise,
            target_slot,
            blocker_slot,
            step_count: 0,
            success_counter: 0,
            jam_counter: 0,
            prev_action: [0.0; 3],
            active_target: start,
            history,
            wrench: Wrench2::ZERO,
            done: false,
        };
        Ok(self.observation())
    }

    pub fn observation(&self) -> Vec<f64> {
        build_observation(&self.episode.history, self.cfg.history_len, self.cfg.include_velocity)
    }

    /// Draws the inference delay for the next step.
    pub fn sample_delay(&mut self) -> usize {
        let (lo, hi) = self.cfg.delay_range;
        self.rng.random_range(lo..=hi)
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        let delay = self.sample_delay();
        self.step_with_delay(action, delay)
    }

    /// Step with an explicit inference delay; `step` samples it from the RNG stream.
    pub fn step_with_delay(&mut self, action: &[f64], delay: usize) -> Result<StepResult, EnvError> {
        if self.episode.done {
            return Err(EnvError::EpisodeOver);
        }
        if action.len() != 3 || action.iter().any(|a| !a.is_finite()) {
            return Err(EnvError::BadAction(action.to_vec()));
        }
        let a = [0, 1, 2].map(|i| action[i].clamp(-1.0, 1.0));
        let cfg = &self.cfg;
        let n = cfg.lowlevel_per_policy;
        let delay = delay.min(n);

        let mut peak_force: f64 = 0.0;
        let mut max_pen: f64 = 0.0;
        let mut jammed = false;
        let mut applied = self.episode.active_target;
        for i in 0..n {
            if i == delay {
                applied = compose_target(self.sim.state.pose, self.episode.noisy_goal, a, cfg);
                self.episode.active_target = applied;
            }
            self.sim.step(self.episode.active_target);
            let force = self.sim.wrench().force_norm();
            peak_force = peak_force.max(force);
            max_pen = max_pen.max(self.sim.max_penetration());
            if force > cfg.jam_force {
                self.episode.jam_counter += 1;
            } else {
                self.episode.jam_counter = 0;
            }
            if self.episode.jam_counter >= cfg.jam_hold {
                jammed = true;
                break;
            }
        }
        if delay == n {
            applied = compose_target(self.sim.state.pose, self.episode.noisy_goal, a, cfg);
            self.episode.active_target = applied;
        }

        let body = self.sim.state;
        let wrench = self.sim.wrench();
        let noisy_goal = self.episode.noisy_goal;
        let velocity = {
            let [vx, vz] = noisy_goal.unrotate([body.twist.vx, body.twist.vz]);
            Twist2::new(vx, vz, body.twist.omega)
        };
        self.episode.history.push(Frame { rel_pose: relative_pose(noisy_goal, body.pose), wrench, velocity });
        self.episode.body = body;
        self.episode.wrench = wrench;
        self.episode.step_count += 1;

        let (inside, counter, success) = check_success(body.pose, &self.sim.world, self.episode.success_counter, cfg);
        self.episode.success_counter = counter;
        let terminated = if success {
            Termination::Success
        } else if jammed {
            Termination::Jam
        } else {
            Termination::None
        };
        let truncated = terminated == Termination::None && self.episode.step_count >= cfg.horizon;

        let rel_true = relative_pose(self.episode.true_goal, body.pose);
        let events = RewardEvents { success: terminated == Termination::Success, jam: terminated == Termination::Jam };
        let terms = reward_terms(rel_true, a, self.episode.prev_action, events, cfg);
        self.episode.prev_action = a;
        self.episode.done = terminated != Termination::None || truncated;

        let (dist, rot) = pose_error_norms(rel_true);
        let info = StepInfo {
            delay,
            pose: body.pose,
            target: applied,
            wrench,
            contact_count: self.sim.contacts().len(),
            wrench_norm: wrench.force_norm(),
            peak_force,
            max_penetration: max_pen,
            dist_to_true_goal: dist,
            rot_to_true_goal: rot,
            in_success_region: inside,
            strict_success: dist < cfg.strict_success_trans && rot < cfg.strict_success_rot,
            success_counter: counter,
            jam_counter: self.episode.jam_counter,
        };
        Ok(StepResult { observation: self.observation(), reward: terms.total(), terms, terminated, truncated, info })
    }
}
