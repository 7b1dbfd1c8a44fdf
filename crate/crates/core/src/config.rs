//! Experiment files: TOML with unit-suffixed keys, converted to SI on load.
//!
//! Lengths are in centimeters (`_cm`), angles in degrees (`_deg`), forces in newtons (`_n`),
//! masses in kilograms (`_kg`), times in seconds (`_s`) and counts in steps (`_steps`).
//! Every key is optional; omitted keys take the built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{BlockerPlacement, Curriculum, EnvConfig, RewardConfig, StartMode};
use crate::eval::{default_grid, AblationVariant, EvalProtocol, TrainSetup};
use crate::sac::{SacConfig, TrainConfig};
use crate::se2::Pose2;
use crate::sim::{PlateShape, SimConfig, WorldLayout};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config file {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

const CM: f64 = 0.01;

fn deg(v: f64) -> f64 {
    v.to_radians()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSection {
    pub horizon_steps: usize,
    pub history_steps: usize,
    pub lowlevel_per_policy_steps: usize,
    pub delay_range_steps: [usize; 2],
    pub eps_trans_cm: f64,
    pub eps_rot_deg: f64,
    pub action_scale_trans_cm: f64,
    pub action_scale_rot_deg: f64,
    pub success_hold_steps: usize,
    pub success_dx_cm: f64,
    pub success_depth_cm: f64,
    pub strict_success_trans_cm: f64,
    pub strict_success_rot_deg: f64,
    pub jam_force_n: f64,
    pub jam_hold_steps: usize,
    pub partial_insert_prob: f64,
    pub start_x_half_range_cm: f64,
    pub start_height_min_cm: f64,
    pub start_height_max_cm: f64,
    pub start_rot_half_range_deg: f64,
    pub blocker_prob: f64,
    pub include_velocity: bool,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        Self {
            horizon_steps: e.horizon,
            history_steps: e.history_len,
            lowlevel_per_policy_steps: e.lowlevel_per_policy,
            delay_range_steps: [e.delay_range.0, e.delay_range.1],
            eps_trans_cm: e.eps_trans_max / CM,
            eps_rot_deg: e.eps_rot_max.to_degrees(),
            action_scale_trans_cm: e.action_scale_trans / CM,
            action_scale_rot_deg: e.action_scale_rot.to_degrees(),
            success_hold_steps: e.success_hold,
            success_dx_cm: e.success_dx / CM,
            success_depth_cm: e.success_depth / CM,
            strict_success_trans_cm: e.strict_success_trans / CM,
            strict_success_rot_deg: e.strict_success_rot.to_degrees(),
            jam_force_n: e.jam_force,
            jam_hold_steps: e.jam_hold,
            partial_insert_prob: e.partial_insert_prob,
            start_x_half_range_cm: e.start_x_half_range / CM,
            start_height_min_cm: e.start_height_min / CM,
            start_height_max_cm: e.start_height_max / CM,
            start_rot_half_range_deg: e.start_rot_half_range.to_degrees(),
            blocker_prob: e.blocker_prob,
            include_velocity: e.include_velocity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSection {
    pub k_dist_trans: f64,
    pub k_dist_rot: f64,
    pub k_action_trans: f64,
    pub k_action_rot: f64,
    pub lambda_dist_trans_cm: f64,
    pub lambda_dist_rot_deg: f64,
    pub lambda_action_trans_cm: f64,
    pub lambda_action_rot_deg: f64,
    pub drop_penalty: f64,
    pub success_reward: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        let r = RewardConfig::default();
        Self {
            k_dist_trans: r.k_dist_trans,
            k_dist_rot: r.k_dist_rot,
            k_action_trans: r.k_action_trans,
            k_action_rot: r.k_action_rot,
            lambda_dist_trans_cm: r.lambda_dist_trans / CM,
            lambda_dist_rot_deg: r.lambda_dist_rot.to_degrees(),
            lambda_action_trans_cm: r.lambda_action_trans / CM,
            lambda_action_rot_deg: r.lambda_action_rot.to_degrees(),
            drop_penalty: r.drop_penalty,
            success_reward: r.success_reward,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub timestep_s: f64,
    pub proportional_gain: f64,
    pub damping_ratio: f64,
    pub translation_error_scaling_cm: f64,
    pub rotation_error_scaling_deg: f64,
    pub contact_stiffness_n_per_m: f64,
    pub contact_damping_n_s_per_m: f64,
    pub tangential_damping_n_s_per_m: f64,
    pub friction_mu: f64,
    pub gravity_m_per_s2: f64,
    pub gravity_compensation: bool,
    pub max_linear_speed_m_per_s: f64,
    pub max_angular_speed_rad_per_s: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            timestep_s: s.dt,
            proportional_gain: s.kp,
            damping_ratio: s.damping_ratio,
            translation_error_scaling_cm: s.err_scale_trans / CM,
            rotation_error_scaling_deg: s.err_scale_rot.to_degrees(),
            contact_stiffness_n_per_m: s.contact_stiffness,
            contact_damping_n_s_per_m: s.contact_damping,
            tangential_damping_n_s_per_m: s.tangential_damping,
            friction_mu: s.friction_mu,
            gravity_m_per_s2: s.gravity,
            gravity_compensation: s.gravity_compensation,
            max_linear_speed_m_per_s: s.max_linear_speed,
            max_angular_speed_rad_per_s: s.max_angular_speed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub slots: usize,
    pub slot_gap_cm: f64,
    pub wall_thickness_cm: f64,
    pub wall_height_cm: f64,
    pub floor_half_length_cm: f64,
    pub blocker_half_width_cm: f64,
    pub blocker_height_cm: f64,
    pub plate_thickness_cm: f64,
    pub plate_length_cm: f64,
    pub plate_mass_kg: f64,
    pub plate_inertia_kg_m2: f64,
    /// End-effector position in the plate-center frame.
    pub grasp_offset_cm: [f64; 2],
}

impl Default for GeometrySection {
    fn default() -> Self {
        let l = WorldLayout::default();
        let p = PlateShape::default();
        Self {
            slots: l.n_slots,
            slot_gap_cm: l.slot_pitch / CM,
            wall_thickness_cm: l.wall_thickness / CM,
            wall_height_cm: l.wall_height / CM,
            floor_half_length_cm: l.floor_half_length / CM,
            blocker_half_width_cm: l.blocker_half_width / CM,
            blocker_height_cm: l.blocker_height / CM,
            plate_thickness_cm: 2.0 * p.half_width / CM,
            plate_length_cm: 2.0 * p.half_height / CM,
            plate_mass_kg: p.mass,
            plate_inertia_kg_m2: p.inertia,
            grasp_offset_cm: [p.grasp_offset.x / CM, p.grasp_offset.z / CM],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub hidden_units: Vec<usize>,
    pub batch_size: usize,
    pub discount_factor: f64,
    pub learning_rate: f64,
    pub initial_alpha: f64,
    pub target_entropy: Option<f64>,
    pub fixed_alpha: Option<f64>,
    pub polyak_tau: f64,
    pub twin_critics: bool,
    pub training_iterations: u64,
    pub random_prefill_steps: usize,
    pub experience_per_iteration_steps: usize,
    pub policy_updates_per_iteration: usize,
    pub parallel_workers: usize,
    pub replay_buffer_size_steps: usize,
    pub metrics_window_episodes: usize,
    /// `[iteration, noise fraction]` pairs; omitted means the default ramp.
    pub curriculum: Option<Vec<(u64, f64)>>,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden_units: t.sac.hidden.clone(),
            batch_size: t.sac.batch_size,
            discount_factor: t.sac.gamma,
            learning_rate: t.sac.lr,
            initial_alpha: t.sac.initial_alpha,
            target_entropy: t.sac.target_entropy,
            fixed_alpha: t.sac.fixed_alpha,
            polyak_tau: t.sac.tau,
            twin_critics: t.sac.twin_critics,
            training_iterations: t.iterations,
            random_prefill_steps: t.prefill_steps,
            experience_per_iteration_steps: t.env_steps_per_iteration,
            policy_updates_per_iteration: t.updates_per_iteration,
            parallel_workers: t.workers,
            replay_buffer_size_steps: t.buffer_capacity,
            metrics_window_episodes: t.metrics_window,
            curriculum: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    /// Empty means every slot.
    pub slots: Vec<usize>,
    pub trials_per_slot: usize,
    pub blocker: BlockerPlacement,
    pub start: StartMode,
    pub noise_fraction: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let p = EvalProtocol::default();
        Self {
            slots: Vec::new(),
            trials_per_slot: p.trials_per_slot,
            blocker: p.blocker,
            start: p.start,
            noise_fraction: p.noise_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub seeds: Vec<u64>,
    pub variants: Vec<AblationVariant>,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self { seeds: vec![0, 1, 2], variants: default_grid() }
    }
}

/// The file as written.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub environment: EnvironmentSection,
    pub reward: RewardSection,
    pub controller: ControllerSection,
    pub geometry: GeometrySection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    pub ablation: AblationSection,
}

/// The file resolved to SI runtime types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub curriculum: Curriculum,
    pub protocol: EvalProtocol,
    pub ablation_seeds: Vec<u64>,
    pub ablation_variants: Vec<AblationVariant>,
}

impl Experiment {
    pub fn train_setup(&self) -> TrainSetup {
        TrainSetup { env: self.env.clone(), train: self.train.clone(), curriculum: self.curriculum.clone() }
    }
}

impl Default for Experiment {
    fn default() -> Self {
        ConfigFile::default().resolve(0).expect("defaults are valid")
    }
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Converts to SI and validates; `seed` becomes the evaluation seed.
    pub fn resolve(&self, seed: u64) -> Result<Experiment, ConfigError> {
        let (e, r, c, g, t) = (&self.environment, &self.reward, &self.controller, &self.geometry, &self.training);
        let env = EnvConfig {
            horizon: e.horizon_steps,
            history_len: e.history_steps,
            lowlevel_per_policy: e.lowlevel_per_policy_steps,
            delay_range: (e.delay_range_steps[0], e.delay_range_steps[1]),
            eps_trans_max: e.eps_trans_cm * CM,
            eps_rot_max: deg(e.eps_rot_deg),
            action_scale_trans: e.action_scale_trans_cm * CM,
            action_scale_rot: deg(e.action_scale_rot_deg),
            success_hold: e.success_hold_steps,
            success_dx: e.success_dx_cm * CM,
            success_depth: e.success_depth_cm * CM,
            strict_success_trans: e.strict_success_trans_cm * CM,
            strict_success_rot: deg(e.strict_success_rot_deg),
            jam_force: e.jam_force_n,
            jam_hold: e.jam_hold_steps,
            partial_insert_prob: e.partial_insert_prob,
            start_x_half_range: e.start_x_half_range_cm * CM,
            start_height_min: e.start_height_min_cm * CM,
            start_height_max: e.start_height_max_cm * CM,
            start_rot_half_range: deg(e.start_rot_half_range_deg),
            blocker_prob: e.blocker_prob,
            include_velocity: e.include_velocity,
            reward: RewardConfig {
                k_dist_trans: r.k_dist_trans,
                k_dist_rot: r.k_dist_rot,
                k_action_trans: r.k_action_trans,
                k_action_rot: r.k_action_rot,
                lambda_dist_trans: r.lambda_dist_trans_cm * CM,
                lambda_dist_rot: deg(r.lambda_dist_rot_deg),
                lambda_action_trans: r.lambda_action_trans_cm * CM,
                lambda_action_rot: deg(r.lambda_action_rot_deg),
                drop_penalty: r.drop_penalty,
                success_reward: r.success_reward,
            },
            sim: SimConfig {
                dt: c.timestep_s,
                kp: c.proportional_gain,
                damping_ratio: c.damping_ratio,
                err_scale_trans: c.translation_error_scaling_cm * CM,
                err_scale_rot: deg(c.rotation_error_scaling_deg),
                contact_stiffness: c.contact_stiffness_n_per_m,
                contact_damping: c.contact_damping_n_s_per_m,
                tangential_damping: c.tangential_damping_n_s_per_m,
                friction_mu: c.friction_mu,
                gravity: c.gravity_m_per_s2,
                gravity_compensation: c.gravity_compensation,
                max_linear_speed: c.max_linear_speed_m_per_s,
                max_angular_speed: c.max_angular_speed_rad_per_s,
            },
            plate: PlateShape {
                half_width: g.plate_thickness_cm * CM / 2.0,
                half_height: g.plate_length_cm * CM / 2.0,
                mass: g.plate_mass_kg,
                inertia: g.plate_inertia_kg_m2,
                grasp_offset: Pose2::translation(g.grasp_offset_cm[0] * CM, g.grasp_offset_cm[1] * CM),
            },
            layout: WorldLayout {
                n_slots: g.slots,
                slot_pitch: g.slot_gap_cm * CM,
                wall_thickness: g.wall_thickness_cm * CM,
                wall_height: g.wall_height_cm * CM,
                floor_z: 0.0,
                floor_half_length: g.floor_half_length_cm * CM,
                blocker_half_width: g.blocker_half_width_cm * CM,
                blocker_height: g.blocker_height_cm * CM,
            },
        };
        env.validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;

        let train = TrainConfig {
            sac: SacConfig {
                hidden: t.hidden_units.clone(),
                batch_size: t.batch_size,
                gamma: t.discount_factor,
                lr: t.learning_rate,
                initial_alpha: t.initial_alpha,
                target_entropy: t.target_entropy,
                fixed_alpha: t.fixed_alpha,
                tau: t.polyak_tau,
                twin_critics: t.twin_critics,
            },
            iterations: t.training_iterations,
            prefill_steps: t.random_prefill_steps,
            env_steps_per_iteration: t.experience_per_iteration_steps,
            updates_per_iteration: t.policy_updates_per_iteration,
            workers: t.parallel_workers,
            buffer_capacity: t.replay_buffer_size_steps,
            metrics_window: t.metrics_window_episodes,
        };
        train.validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
        let curriculum = match &t.curriculum {
            Some(bp) => Curriculum::new(bp.clone()).map_err(|err| ConfigError::Invalid(err.to_string()))?,
            None => Curriculum::default_for(t.training_iterations),
        };

        let v = &self.evaluation;
        let protocol = EvalProtocol {
            slots: if v.slots.is_empty() { (0..env.layout.n_slots).collect() } else { v.slots.clone() },
            trials_per_slot: v.trials_per_slot,
            blocker: v.blocker,
            start: v.start,
            noise_fraction: v.noise_fraction,
            seed,
        };
        protocol.validate(&env).map_err(|err| ConfigError::Invalid(err.to_string()))?;
        if self.ablation.seeds.is_empty() {
            return Err(ConfigError::Invalid("ablation needs at least one seed".into()));
        }
        Ok(Experiment {
            env,
            train,
            curriculum,
            protocol,
            ablation_seeds: self.ablation.seeds.clone(),
            ablation_variants: self.ablation.variants.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn defaults_resolve_to_runtime_defaults() {
        let x = ConfigFile::default().resolve(3).unwrap();
        let d = EnvConfig::default();
        assert_eq!(x.env.horizon, d.horizon);
        assert!(close(x.env.eps_trans_max, d.eps_trans_max));
        assert!(close(x.env.eps_rot_max, d.eps_rot_max));
        assert!(close(x.env.action_scale_rot, d.action_scale_rot));
        assert!(close(x.env.plate.half_height, d.plate.half_height));
        assert!(close(x.env.reward.lambda_dist_rot, d.reward.lambda_dist_rot));
        assert_eq!(x.train, TrainConfig::default());
        assert_eq!(x.protocol.slots, vec![0, 1, 2]);
        assert_eq!(x.protocol.seed, 3);
    }

    #[test]
    fn units_convert() {
        let text = "[environment]\neps_trans_cm = 2.0\neps_rot_deg = 90.0\n\
                    [geometry]\nslot_gap_cm = 12.0\n";
        let x = ConfigFile::parse(text, Path::new("t.toml")).unwrap().resolve(0).unwrap();
        assert!(close(x.env.eps_trans_max, 0.02));
        assert!(close(x.env.eps_rot_max, std::f64::consts::FRAC_PI_2));
        assert!(close(x.env.layout.slot_pitch, 0.12));
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let p = Path::new("t.toml");
        assert!(matches!(ConfigFile::parse("[environment]\nhorizon = 5\n", p), Err(ConfigError::Parse { .. })));
        let bad = ConfigFile::parse("[environment]\nhistory_steps = 0\n", p).unwrap();
        assert!(matches!(bad.resolve(0), Err(ConfigError::Invalid(_))));
        let bad = ConfigFile::parse("[evaluation]\ntrials_per_slot = 0\n", p).unwrap();
        assert!(bad.resolve(0).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut f = ConfigFile::default();
        f.evaluation.blocker = BlockerPlacement::Slot(1);
        f.training.curriculum = Some(vec![(0, 0.0), (10, 1.0)]);
        let back = ConfigFile::parse(&f.to_toml(), Path::new("x")).unwrap();
        assert_eq!(back, f);
    }
}
