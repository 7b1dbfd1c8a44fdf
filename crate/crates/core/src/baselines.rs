//! Scripted comparison policies. Both speak the same normalized residual-action interface
//! as the learned policy, cancelling the goal-seeking base term to realize their own targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{base_action, in_success_region, EnvConfig, EpisodeState, InsertionEnv};
use crate::policy::Policy;
use crate::se2::Pose2;
use crate::sim::WorldGeometry;

/// Downward step of the straight-down baseline per policy step, meters.
pub const STRAIGHT_DOWN_STEP: f64 = 0.05;

/// Action whose composite target is `current` displaced by `(dx, dz)` in the base frame and
/// rotated by `dtheta`, as far as the action bounds allow.
pub fn action_for_displacement(current: Pose2, noisy_goal: Pose2, disp: [f64; 3], cfg: &EnvConfig) -> [f64; 3] {
    let local = current.unrotate([disp[0], disp[1]]);
    let scales = cfg.action_scales();
    let desired = [local[0] / scales[0], local[1] / scales[1], disp[2] / scales[2]];
    let base = base_action(current, noisy_goal, cfg);
    [0, 1, 2].map(|i| (desired[i] - base[i]).clamp(-1.0, 1.0))
}

pub fn straight_down_action(state: &EpisodeState, cfg: &EnvConfig) -> [f64; 3] {
    action_for_displacement(state.body.pose, state.noisy_goal, [0.0, -STRAIGHT_DOWN_STEP, 0.0], cfg)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StraightDown;

impl Policy for StraightDown {
    fn name(&self) -> String {
        "straight-down".into()
    }

    fn act(&mut self, env: &InsertionEnv, _obs: &[f64]) -> Vec<f64> {
        straight_down_action(env.episode(), env.config()).to_vec()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchPhase {
    #[default]
    Descend,
    Retreat,
    Reposition,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSearchConfig {
    /// Side of the sampling interval around the noisy goal, meters.
    pub square_side: f64,
    /// Contact force that ends a descent, newtons.
    pub contact_force: f64,
    /// Plate-bottom height above the slot top to retreat to, meters.
    pub retreat_height: f64,
    /// Horizontal distance at which repositioning counts as done, meters.
    pub position_tolerance: f64,
}

impl Default for RandomSearchConfig {
    fn default() -> Self {
        Self { square_side: 0.05, contact_force: 3.0, retreat_height: 0.05, position_tolerance: 0.002 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSearchState {
    pub phase: SearchPhase,
    /// Current sample point relative to the noisy goal, meters.
    pub x_offset: f64,
}

impl Default for RandomSearchState {
    fn default() -> Self {
        Self { phase: SearchPhase::Descend, x_offset: 0.0 }
    }
}

fn bottom_height(pose: Pose2, cfg: &EnvConfig) -> f64 {
    cfg.plate.bottom_z(pose)
}

/// One random-search decision from the observed contact wrench.
pub fn random_search_action<R: Rng + ?Sized>(
    state: &EpisodeState,
    world: &WorldGeometry,
    cfg: &EnvConfig,
    rs: RandomSearchState,
    rs_cfg: &RandomSearchConfig,
    rng: &mut R,
) -> ([f64; 3], RandomSearchState) {
    let pose = state.body.pose;
    let retreat_z = world.slot_top_z + rs_cfg.retreat_height;
    let mut next = rs;

    if next.phase == SearchPhase::Descend
        && state.wrench.force_norm() >= rs_cfg.contact_force
        && !in_success_region(pose, world, cfg)
    {
        next.phase = SearchPhase::Retreat;
    }
    if next.phase == SearchPhase::Retreat && bottom_height(pose, cfg) >= retreat_z {
        next.phase = SearchPhase::Reposition;
        let half = rs_cfg.square_side / 2.0;
        next.x_offset = rng.random_range(-half..=half);
    }
    let target_x = state.noisy_goal.x + next.x_offset;
    if next.phase == SearchPhase::Reposition && (pose.x - target_x).abs() <= rs_cfg.position_tolerance {
        next.phase = SearchPhase::Descend;
    }

    let disp = match next.phase {
        SearchPhase::Descend => [0.0, -STRAIGHT_DOWN_STEP, 0.0],
        SearchPhase::Retreat => [0.0, retreat_z + 0.01 - bottom_height(pose, cfg), 0.0],
        SearchPhase::Reposition => [target_x - pose.x, retreat_z - bottom_height(pose, cfg), 0.0],
    };
    (action_for_displacement(pose, state.noisy_goal, disp, cfg), next)
}

/// Random-search baseline with its own RNG stream, re-seeded every episode.
#[derive(Clone, Debug)]
pub struct RandomSearch {
    pub cfg: RandomSearchConfig,
    pub state: RandomSearchState,
    rng: ChaCha8Rng,
}

impl RandomSearch {
    pub fn new(cfg: RandomSearchConfig) -> Self {
        Self { cfg, state: RandomSearchState::default(), rng: ChaCha8Rng::seed_from_u64(0) }
    }
}

impl Default for RandomSearch {
    fn default() -> Self {
        Self::new(RandomSearchConfig::default())
    }
}

impl Policy for RandomSearch {
    fn name(&self) -> String {
        "random-search".into()
    }

    fn begin_episode(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = RandomSearchState::default();
    }

    fn act(&mut self, env: &InsertionEnv, _obs: &[f64]) -> Vec<f64> {
        let (a, next) =
            random_search_action(env.episode(), env.world(), env.config(), self.state, &self.cfg, &mut self.rng);
        self.state = next;
        a.to_vec()
    }
}
