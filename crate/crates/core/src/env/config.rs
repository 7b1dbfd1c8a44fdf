use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::sim::{PlateShape, SimConfig, WorldLayout};

/// Reward constants. Translation terms are in meters, rotation terms in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub k_dist_trans: f64,
    pub k_dist_rot: f64,
    pub k_action_trans: f64,
    pub k_action_rot: f64,
    pub lambda_dist_trans: f64,
    pub lambda_dist_rot: f64,
    pub lambda_action_trans: f64,
    pub lambda_action_rot: f64,
    pub drop_penalty: f64,
    pub success_reward: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            k_dist_trans: 8.59e-3,
            k_dist_rot: 8.21e-3,
            k_action_trans: 8.59e-3,
            k_action_rot: 8.21e-3,
            lambda_dist_trans: 0.5,
            lambda_dist_rot: 30f64.to_radians(),
            lambda_action_trans: 0.5,
            lambda_action_rot: 30f64.to_radians(),
            drop_penalty: -1.1,
            success_reward: 0.5,
        }
    }
}

/// Everything that defines the insertion MDP, in SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon: usize,
    pub history_len: usize,
    pub lowlevel_per_policy: usize,
    /// Inclusive range of low-level steps between observation capture and action application.
    pub delay_range: (usize, usize),
    pub eps_trans_max: f64,
    pub eps_rot_max: f64,
    pub action_scale_trans: f64,
    pub action_scale_rot: f64,
    pub success_hold: usize,
    /// Half-width of the success band around any slot center.
    pub success_dx: f64,
    /// The plate bottom must be this far below the slot top to count as inserted.
    pub success_depth: f64,
    /// Tolerances of the strict success metric (logged only).
    pub strict_success_trans: f64,
    pub strict_success_rot: f64,
    pub jam_force: f64,
    pub jam_hold: usize,
    pub partial_insert_prob: f64,
    /// Start region relative to the noisy goal: `x` offset half range, plate-bottom height
    /// above the slot top, and heading offset half range.
    pub start_x_half_range: f64,
    pub start_height_min: f64,
    pub start_height_max: f64,
    pub start_rot_half_range: f64,
    /// Probability that the target slot holds a blocking object in sampled resets.
    pub blocker_prob: f64,
    pub include_velocity: bool,
    pub reward: RewardConfig,
    pub sim: SimConfig,
    pub plate: PlateShape,
    pub layout: WorldLayout,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            horizon: 128,
            history_len: 8,
            lowlevel_per_policy: 50,
            delay_range: (7, 13),
            eps_trans_max: 0.05,
            eps_rot_max: 5f64.to_radians(),
            action_scale_trans: 0.45,
            action_scale_rot: 50f64.to_radians(),
            success_hold: 10,
            success_dx: 0.045,
            success_depth: 0.02,
            strict_success_trans: 0.02,
            strict_success_rot: 10f64.to_radians(),
            jam_force: 50.0,
            jam_hold: 200,
            partial_insert_prob: 0.5,
            start_x_half_range: 0.10,
            start_height_min: 0.10,
            start_height_max: 0.25,
            start_rot_half_range: 0.0,
            blocker_prob: 0.0,
            include_velocity: false,
            reward: RewardConfig::default(),
            sim: SimConfig::default(),
            plate: PlateShape::default(),
            layout: WorldLayout::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidConfig(msg));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.history_len == 0 {
            return bad("history length must be at least 1".into());
        }
        if self.lowlevel_per_policy == 0 {
            return bad("low-level steps per policy step must be positive".into());
        }
        let (lo, hi) = self.delay_range;
        if lo > hi || hi > self.lowlevel_per_policy {
            return bad(format!("delay range [{lo}, {hi}] must lie within [0, {}]", self.lowlevel_per_policy));
        }
        if self.success_hold == 0 || self.jam_hold == 0 {
            return bad("success and jam hold counts must be positive".into());
        }
        let positive = [
            ("action_scale_trans", self.action_scale_trans),
            ("action_scale_rot", self.action_scale_rot),
            ("success_dx", self.success_dx),
            ("jam_force", self.jam_force),
            ("strict_success_trans", self.strict_success_trans),
            ("strict_success_rot", self.strict_success_rot),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("eps_trans_max", self.eps_trans_max),
            ("eps_rot_max", self.eps_rot_max),
            ("success_depth", self.success_depth),
            ("start_x_half_range", self.start_x_half_range),
            ("start_height_min", self.start_height_min),
            ("start_rot_half_range", self.start_rot_half_range),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.start_height_max < self.start_height_min {
            return bad("start height range is empty".into());
        }
        for (name, p) in [("partial_insert_prob", self.partial_insert_prob), ("blocker_prob", self.blocker_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        self.sim.validate()?;
        self.plate.validate()?;
        Ok(())
    }

    /// Per-axis action scales `(x, z, theta)`.
    pub fn action_scales(&self) -> [f64; 3] {
        [self.action_scale_trans, self.action_scale_trans, self.action_scale_rot]
    }

    /// Number of values per observation frame.
    pub fn frame_width(&self) -> usize {
        if self.include_velocity {
            9
        } else {
            6
        }
    }

    pub fn observation_dim(&self) -> usize {
        self.frame_width() * self.history_len
    }

    /// Copy with target noise and inference delay disabled.
    pub fn without_randomization(&self) -> Self {
        Self { eps_trans_max: 0.0, eps_rot_max: 0.0, delay_range: (0, 0), ..self.clone() }
    }
}

/// Piecewise-linear schedule for the fraction of full target noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub breakpoints: Vec<(u64, f64)>,
}

impl Curriculum {
    pub fn new(breakpoints: Vec<(u64, f64)>) -> Result<Self, EnvError> {
        if breakpoints.is_empty() {
            return Err(EnvError::InvalidConfig("curriculum needs at least one breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(EnvError::InvalidConfig("curriculum iterations must be strictly increasing".into()));
        }
        if breakpoints.iter().any(|b| !(0.0..=1.0).contains(&b.1)) {
            return Err(EnvError::InvalidConfig("curriculum fractions must lie in [0, 1]".into()));
        }
        Ok(Self { breakpoints })
    }

    /// Full noise from the start.
    pub fn constant(fraction: f64) -> Self {
        Self { breakpoints: vec![(0, fraction.clamp(0.0, 1.0))] }
    }

    /// Zero until 10% of training, linear ramp to full noise at 50%.
    pub fn default_for(total_iterations: u64) -> Self {
        let a = total_iterations / 10;
        let b = (total_iterations / 2).max(a + 1);
        if a == 0 {
            return Self { breakpoints: vec![(0, 0.0), (b, 1.0)] };
        }
        Self { breakpoints: vec![(0, 0.0), (a, 0.0), (b, 1.0)] }
    }

    pub fn fraction(&self, iteration: u64) -> f64 {
        let bp = &self.breakpoints;
        let Some(first) = bp.first() else { return 1.0 };
        if iteration <= first.0 {
            return first.1;
        }
        for w in bp.windows(2) {
            let ((i0, f0), (i1, f1)) = (w[0], w[1]);
            if iteration <= i1 {
                let t = (iteration - i0) as f64 / (i1 - i0) as f64;
                return (f0 + t * (f1 - f0)).clamp(0.0, 1.0);
            }
        }
        bp[bp.len() - 1].1
    }
}

/// Noise half-ranges `(translation, rotation)` at a training iteration.
pub fn curriculum_epsilon(iteration: u64, curriculum: &Curriculum, cfg: &EnvConfig) -> (f64, f64) {
    let f = curriculum.fraction(iteration);
    (f * cfg.eps_trans_max, f * cfg.eps_rot_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn curriculum_examples() {
        let cfg = EnvConfig::default();
        let c = Curriculum::new(vec![(0, 0.0), (1000, 1.0)]).unwrap();
        assert_eq!(curriculum_epsilon(0, &c, &cfg), (0.0, 0.0));
        for it in [1000, 5000] {
            let (t, r) = curriculum_epsilon(it, &c, &cfg);
            assert_abs_diff_eq!(t, 0.05, epsilon = 1e-15);
            assert_abs_diff_eq!(r, 5f64.to_radians(), epsilon = 1e-15);
        }
        let (t, r) = curriculum_epsilon(500, &c, &cfg);
        assert_abs_diff_eq!(t, 0.025, epsilon = 1e-15);
        assert_abs_diff_eq!(r.to_degrees(), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn default_curriculum_shape() {
        let c = Curriculum::default_for(5000);
        assert_eq!(c.fraction(0), 0.0);
        assert_eq!(c.fraction(500), 0.0);
        assert_abs_diff_eq!(c.fraction(1500), 0.5, epsilon = 1e-12);
        assert_eq!(c.fraction(2500), 1.0);
        assert_eq!(c.fraction(100_000), 1.0);
        assert_eq!(Curriculum::default_for(1).fraction(1), 1.0);
    }

    #[test]
    fn curriculum_rejects_bad_breakpoints() {
        assert!(Curriculum::new(vec![]).is_err());
        assert!(Curriculum::new(vec![(10, 0.0), (10, 1.0)]).is_err());
        assert!(Curriculum::new(vec![(0, 0.0), (10, 1.5)]).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = EnvConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.observation_dim(), 48);
        let bad = EnvConfig { delay_range: (7, 60), ..EnvConfig::default() };
        assert!(bad.validate().is_err());
        let bad = EnvConfig { history_len: 0, ..EnvConfig::default() };
        assert!(bad.validate().is_err());
    }
}
