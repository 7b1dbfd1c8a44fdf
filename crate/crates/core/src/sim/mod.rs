//! Deterministic 1 kHz planar stepper for the fused gripper+plate body.
//!
//! The body is driven by a task-space impedance law towards a target pose and
//! collides with static geometry through penalty contacts. Damping terms (impedance
//! and contact) are integrated implicitly inside a semi-implicit Euler step, which
//! keeps the stiff contact springs stable at the fixed 1 ms step.

mod contact;
mod geometry;

pub use contact::{contact_forces, detect_contacts, end_effector_wrench, ContactPoint, SEGMENT_DEPTH};
pub use geometry::{spawn_world, Aabb, BlockerSpec, PlateShape, Segment, WorldGeometry, WorldLayout};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se2::{wrap_angle, Pose2, Twist2, Wrench2};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid plate shape: {0}")]
    InvalidShape(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub kp: f64,
    pub damping_ratio: f64,
    /// Saturation of the translational pose error fed to the impedance law (m).
    pub err_scale_trans: f64,
    /// Saturation of the rotational pose error fed to the impedance law (rad).
    pub err_scale_rot: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    /// Viscous coefficient of sticking friction before the Coulomb clamp.
    pub tangential_damping: f64,
    pub friction_mu: f64,
    /// Signed vertical gravitational acceleration (negative is down).
    pub gravity: f64,
    pub gravity_compensation: bool,
    pub max_linear_speed: f64,
    pub max_angular_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            kp: 150.0,
            damping_ratio: 1.0,
            err_scale_trans: 0.05,
            err_scale_rot: 0.5,
            contact_stiffness: 1e5,
            contact_damping: 300.0,
            tangential_damping: 300.0,
            friction_mu: 0.4,
            gravity: -9.81,
            gravity_compensation: true,
            max_linear_speed: 20.0,
            max_angular_speed: 200.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let checks = [
            ("dt", self.dt),
            ("damping_ratio", self.damping_ratio),
            ("contact_stiffness", self.contact_stiffness),
            ("err_scale_trans", self.err_scale_trans),
            ("err_scale_rot", self.err_scale_rot),
            ("max_linear_speed", self.max_linear_speed),
            ("max_angular_speed", self.max_angular_speed),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("kp", self.kp),
            ("contact_damping", self.contact_damping),
            ("tangential_damping", self.tangential_damping),
            ("friction_mu", self.friction_mu),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.gravity.is_finite() {
            return Err(SimError::InvalidConfig("gravity must be finite".into()));
        }
        Ok(())
    }

    /// Damping gains `(translation, rotation)` for critical-style damping of the impedance.
    pub fn damping_gains(&self, shape: &PlateShape) -> (f64, f64) {
        let kd = |m: f64| 2.0 * self.damping_ratio * (self.kp * m).sqrt();
        (kd(shape.mass), kd(shape.inertia))
    }
}

/// End-effector pose in the base frame and its velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub pose: Pose2,
    pub twist: Twist2,
}

impl BodyState {
    pub fn at(pose: Pose2) -> Self {
        Self { pose, twist: Twist2::ZERO }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.is_finite() && self.twist.is_finite()
    }
}

/// Base-frame pose error towards `target`, saturated per axis.
pub fn impedance_error(pose: Pose2, target: Pose2, cfg: &SimConfig) -> [f64; 3] {
    let st = cfg.err_scale_trans;
    let sr = cfg.err_scale_rot;
    [
        (target.x - pose.x).clamp(-st, st),
        (target.z - pose.z).clamp(-st, st),
        wrap_angle(target.theta - pose.theta).clamp(-sr, sr),
    ]
}

/// Impedance wrench `kp * e - kd * twist`, with `e` the saturated pose error.
///
/// `kd = 2 * damping_ratio * sqrt(kp * m)` with `m` the mass for translation and the
/// inertia for rotation.
pub fn impedance_force(state: &BodyState, target: Pose2, shape: &PlateShape, cfg: &SimConfig) -> Wrench2 {
    let e = impedance_error(state.pose, target, cfg);
    let (kd_t, kd_r) = cfg.damping_gains(shape);
    Wrench2::new(
        cfg.kp * e[0] - kd_t * state.twist.vx,
        cfg.kp * e[1] - kd_t * state.twist.vz,
        cfg.kp * e[2] - kd_r * state.twist.omega,
    )
}

/// Gravity plus the controller's feed-forward compensation, if enabled.
fn body_force(shape: &PlateShape, cfg: &SimConfig) -> Wrench2 {
    let g = if cfg.gravity_compensation { 0.0 } else { cfg.gravity };
    Wrench2::new(0.0, shape.mass * g, 0.0)
}

type Mat3 = [[f64; 3]; 3];

fn add_outer(m: &mut Mat3, scale: f64, a: [f64; 3], b: [f64; 3]) {
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += scale * a[i] * b[j];
        }
    }
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: Mat3, mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap_or(col);
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

#[derive(Clone, Copy, PartialEq)]
enum NormalMode {
    Active,
    Inactive,
}

#[derive(Clone, Copy, PartialEq)]
enum FrictionMode {
    Stick,
    Slide(f64),
}

const MAX_ACTIVE_SET_ITERS: usize = 16;

fn jacobian_row(dir: [f64; 2], lever: [f64; 2]) -> [f64; 3] {
    [dir[0], dir[1], lever[0] * dir[1] - lever[1] * dir[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Velocity after one step with damping and contact forces treated implicitly.
///
/// Contact modes (normal on/off, friction stick/slide) are chosen by an active-set
/// iteration so that the converged forces agree with [`contact_forces`] at the new
/// velocity.
fn implicit_velocity(
    state: &BodyState,
    target: Pose2,
    contacts: &[ContactPoint],
    shape: &PlateShape,
    cfg: &SimConfig,
) -> Twist2 {
    let dt = cfg.dt;
    let mass = [shape.mass, shape.mass, shape.inertia];
    let v0 = [state.twist.vx, state.twist.vz, state.twist.omega];
    let e = impedance_error(state.pose, target, cfg);
    let (kd_t, kd_r) = cfg.damping_gains(shape);
    let kd = [kd_t, kd_t, kd_r];
    let g = body_force(shape, cfg);
    let explicit = [cfg.kp * e[0] + g.fx, cfg.kp * e[1] + g.fz, cfg.kp * e[2] + g.tau];

    let rows: Vec<([f64; 3], [f64; 3])> = contacts
        .iter()
        .map(|c| {
            let lever = c.lever(state.pose);
            (jacobian_row(c.normal, lever), jacobian_row(c.tangent(), lever))
        })
        .collect();
    let k = cfg.contact_stiffness;
    let c_n = cfg.contact_damping;
    let c_t = cfg.tangential_damping;
    let mu = cfg.friction_mu;

    let mut normal_modes: Vec<NormalMode> = contacts
        .iter()
        .zip(&rows)
        .map(
            |(c, (jn, _))| {
                if k * c.penetration - c_n * dot3(*jn, v0) > 0.0 {
                    NormalMode::Active
                } else {
                    NormalMode::Inactive
                }
            },
        )
        .collect();
    let mut friction_modes = vec![FrictionMode::Stick; contacts.len()];

    let mut v = v0;
    for _ in 0..MAX_ACTIVE_SET_ITERS {
        let mut lhs: Mat3 = [[0.0; 3]; 3];
        let mut rhs = [0.0; 3];
        for i in 0..3 {
            lhs[i][i] = mass[i] + dt * kd[i];
            rhs[i] = mass[i] * v0[i] + dt * explicit[i];
        }
        for (idx, c) in contacts.iter().enumerate() {
            if normal_modes[idx] == NormalMode::Inactive {
                continue;
            }
            let (jn, jt) = rows[idx];
            let spring = k * c.penetration;
            add_outer(&mut lhs, dt * c_n, jn, jn);
            for i in 0..3 {
                rhs[i] += dt * spring * jn[i];
            }
            match friction_modes[idx] {
                FrictionMode::Stick => add_outer(&mut lhs, dt * c_t, jt, jt),
                FrictionMode::Slide(s) => {
                    // f_t = -s * mu * (spring - c_n * jn.v)
                    add_outer(&mut lhs, -dt * s * mu * c_n, jt, jn);
                    for i in 0..3 {
                        rhs[i] -= dt * s * mu * spring * jt[i];
                    }
                }
            }
        }
        v = solve3(lhs, rhs);

        let mut changed = false;
        for (idx, c) in contacts.iter().enumerate() {
            let (jn, jt) = rows[idx];
            let raw_normal = k * c.penetration - c_n * dot3(jn, v);
            match normal_modes[idx] {
                NormalMode::Active if raw_normal < 0.0 => {
                    normal_modes[idx] = NormalMode::Inactive;
                    changed = true;
                    continue;
                }
                NormalMode::Inactive if raw_normal > 0.0 => {
                    normal_modes[idx] = NormalMode::Active;
                    friction_modes[idx] = FrictionMode::Stick;
                    changed = true;
                    continue;
                }
                NormalMode::Inactive => continue,
                NormalMode::Active => {}
            }
            let slip = dot3(jt, v);
            match friction_modes[idx] {
                FrictionMode::Stick => {
                    if (c_t * slip).abs() > mu * raw_normal {
                        friction_modes[idx] = FrictionMode::Slide(slip.signum());
                        changed = true;
                    }
                }
                FrictionMode::Slide(s) => {
                    if s * slip < 0.0 || c_t * slip.abs() < mu * raw_normal {
                        friction_modes[idx] = FrictionMode::Stick;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Twist2::new(v[0], v[1], v[2])
}

fn clamp_twist(t: Twist2, cfg: &SimConfig) -> Twist2 {
    let speed = t.linear_speed();
    let s = if speed > cfg.max_linear_speed { cfg.max_linear_speed / speed } else { 1.0 };
    Twist2::new(t.vx * s, t.vz * s, t.omega.clamp(-cfg.max_angular_speed, cfg.max_angular_speed))
}

/// Result of one low-level step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub state: BodyState,
    /// Contacts detected at the start of the step, with the forces that were applied.
    pub contacts: Vec<ContactPoint>,
    pub impedance: Wrench2,
}

impl StepOutput {
    pub fn wrench(&self) -> Wrench2 {
        end_effector_wrench(&self.contacts)
    }
}

/// Advances the body by one controller period `cfg.dt` while tracking `target`.
///
/// The total force is impedance + gravity (+ compensation) + contacts. Velocity is
/// updated first, then the pose from the new velocity; twist is clamped to the caps.
pub fn step_lowlevel(
    state: &BodyState,
    target: Pose2,
    shape: &PlateShape,
    world: &WorldGeometry,
    cfg: &SimConfig,
) -> StepOutput {
    let detected = detect_contacts(state.pose, shape, world);
    let v_implicit = implicit_velocity(state, target, &detected, shape, cfg);

    // Forces evaluated at the implicit velocity are the ones applied, so the reported
    // contact wrench is exactly what accelerated the body.
    let at_new = BodyState { pose: state.pose, twist: v_implicit };
    let contacts = contact_forces(&detected, &at_new, cfg);
    let impedance = impedance_force(&at_new, target, shape, cfg);
    let total = impedance + body_force(shape, cfg) + contacts.iter().map(|c| c.force).sum();

    let dt = cfg.dt;
    let t = state.twist;
    let twist = clamp_twist(
        Twist2::new(
            t.vx + dt * total.fx / shape.mass,
            t.vz + dt * total.fz / shape.mass,
            t.omega + dt * total.tau / shape.inertia,
        ),
        cfg,
    );
    let p = state.pose;
    let pose = Pose2::new(p.x + dt * twist.vx, p.z + dt * twist.vz, p.theta + dt * twist.omega);
    StepOutput { state: BodyState { pose, twist }, contacts, impedance }
}

/// Owns the body state together with its static scene. RNG-free.
#[derive(Clone, Debug)]
pub struct Simulator {
    pub shape: PlateShape,
    pub world: WorldGeometry,
    pub cfg: SimConfig,
    pub state: BodyState,
    last_contacts: Vec<ContactPoint>,
}

impl Simulator {
    pub fn new(shape: PlateShape, world: WorldGeometry, cfg: SimConfig, state: BodyState) -> Result<Self, SimError> {
        shape.validate()?;
        world.validate(&shape)?;
        cfg.validate()?;
        Ok(Self { shape, world, cfg, state, last_contacts: Vec::new() })
    }

    pub fn step(&mut self, target: Pose2) -> &[ContactPoint] {
        let out = step_lowlevel(&self.state, target, &self.shape, &self.world, &self.cfg);
        self.state = out.state;
        self.last_contacts = out.contacts;
        &self.last_contacts
    }

    pub fn contacts(&self) -> &[ContactPoint] {
        &self.last_contacts
    }

    /// Contact wrench of the most recent step.
    pub fn wrench(&self) -> Wrench2 {
        end_effector_wrench(&self.last_contacts)
    }

    pub fn max_penetration(&self) -> f64 {
        self.last_contacts.iter().map(|c| c.penetration).fold(0.0, f64::max)
    }
}
