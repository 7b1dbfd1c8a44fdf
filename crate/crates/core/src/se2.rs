//! Planar rigid-body algebra in the vertical x-z plane.
//!
//! Angles are measured counter-clockwise from +x towards +z. Every pose keeps its
//! heading wrapped to (-pi, pi].

use std::f64::consts::{PI, TAU};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// A planar rigid transform: translation `(x, z)` in meters and heading `theta` in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Pose2 {
    pub x: f64,
    pub z: f64,
    pub theta: f64,
}

impl From<[f64; 3]> for Pose2 {
    fn from(v: [f64; 3]) -> Self {
        Pose2::new(v[0], v[1], v[2])
    }
}

impl From<Pose2> for [f64; 3] {
    fn from(p: Pose2) -> Self {
        p.to_array()
    }
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 { x: 0.0, z: 0.0, theta: 0.0 };

    pub fn new(x: f64, z: f64, theta: f64) -> Self {
        Self { x, z, theta: wrap_angle(theta) }
    }

    pub fn translation(x: f64, z: f64) -> Self {
        Self { x, z, theta: 0.0 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.z, self.theta]
    }

    /// Maps a point expressed in this frame into the parent frame.
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.x + c * p[0] - s * p[1], self.z + s * p[0] + c * p[1]]
    }

    /// Rotates a free vector from this frame into the parent frame.
    pub fn rotate(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    /// Rotates a free vector from the parent frame into this frame.
    pub fn unrotate(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite() && self.theta.is_finite()
    }
}

/// Homogeneous product `a * b`.
pub fn compose(a: Pose2, b: Pose2) -> Pose2 {
    let [x, z] = a.transform_point([b.x, b.z]);
    Pose2::new(x, z, a.theta + b.theta)
}

pub fn inverse(p: Pose2) -> Pose2 {
    let [x, z] = p.unrotate([p.x, p.z]);
    Pose2::new(-x, -z, -p.theta)
}

/// Pose of `p` expressed in the frame `reference`, i.e. `reference^-1 * p`.
pub fn relative_pose(reference: Pose2, p: Pose2) -> Pose2 {
    compose(inverse(reference), p)
}

/// Re-expresses a wrench given in a child frame in the parent frame of `frame`.
///
/// The force is rotated into the parent frame and the torque picks up the moment
/// of that force about the parent origin.
pub fn transform_wrench(frame: Pose2, w: Wrench2) -> Wrench2 {
    let [fx, fz] = frame.rotate([w.fx, w.fz]);
    Wrench2 { fx, fz, tau: w.tau + frame.x * fz - frame.z * fx }
}

/// Translation and rotation magnitudes of a pose error.
pub fn pose_error_norms(p: Pose2) -> (f64, f64) {
    (p.x.hypot(p.z), wrap_angle(p.theta).abs())
}

/// Planar velocity: linear `(vx, vz)` in m/s and angular `omega` in rad/s.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Twist2 {
    pub vx: f64,
    pub vz: f64,
    pub omega: f64,
}

impl From<[f64; 3]> for Twist2 {
    fn from(v: [f64; 3]) -> Self {
        Twist2::new(v[0], v[1], v[2])
    }
}

impl From<Twist2> for [f64; 3] {
    fn from(t: Twist2) -> Self {
        [t.vx, t.vz, t.omega]
    }
}

impl Twist2 {
    pub const ZERO: Twist2 = Twist2 { vx: 0.0, vz: 0.0, omega: 0.0 };

    pub fn new(vx: f64, vz: f64, omega: f64) -> Self {
        Self { vx, vz, omega }
    }

    pub fn linear_speed(&self) -> f64 {
        self.vx.hypot(self.vz)
    }

    /// Velocity of a point at offset `r` (base-frame vector from the reference point).
    pub fn point_velocity(&self, r: [f64; 2]) -> [f64; 2] {
        [self.vx - self.omega * r[1], self.vz + self.omega * r[0]]
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vz.is_finite() && self.omega.is_finite()
    }
}

/// Planar force-torque triple: force `(fx, fz)` in newtons and torque `tau` in N*m.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Wrench2 {
    pub fx: f64,
    pub fz: f64,
    pub tau: f64,
}

impl From<[f64; 3]> for Wrench2 {
    fn from(v: [f64; 3]) -> Self {
        Wrench2::new(v[0], v[1], v[2])
    }
}

impl From<Wrench2> for [f64; 3] {
    fn from(w: Wrench2) -> Self {
        w.to_array()
    }
}

impl Wrench2 {
    pub const ZERO: Wrench2 = Wrench2 { fx: 0.0, fz: 0.0, tau: 0.0 };

    pub fn new(fx: f64, fz: f64, tau: f64) -> Self {
        Self { fx, fz, tau }
    }

    /// Wrench about the origin produced by force `f` applied at point `p`.
    pub fn from_force_at(f: [f64; 2], p: [f64; 2]) -> Self {
        Self { fx: f[0], fz: f[1], tau: p[0] * f[1] - p[1] * f[0] }
    }

    pub fn force_norm(&self) -> f64 {
        self.fx.hypot(self.fz)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.fx, self.fz, self.tau]
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fz.is_finite() && self.tau.is_finite()
    }
}

impl Add for Wrench2 {
    type Output = Wrench2;
    fn add(self, o: Wrench2) -> Wrench2 {
        Wrench2::new(self.fx + o.fx, self.fz + o.fz, self.tau + o.tau)
    }
}

impl AddAssign for Wrench2 {
    fn add_assign(&mut self, o: Wrench2) {
        *self = *self + o;
    }
}

impl Sub for Wrench2 {
    type Output = Wrench2;
    fn sub(self, o: Wrench2) -> Wrench2 {
        self + (-o)
    }
}

impl Neg for Wrench2 {
    type Output = Wrench2;
    fn neg(self) -> Wrench2 {
        Wrench2::new(-self.fx, -self.fz, -self.tau)
    }
}

impl Mul<f64> for Wrench2 {
    type Output = Wrench2;
    fn mul(self, s: f64) -> Wrench2 {
        Wrench2::new(self.fx * s, self.fz * s, self.tau * s)
    }
}

impl Sum for Wrench2 {
    fn sum<I: Iterator<Item = Wrench2>>(iter: I) -> Wrench2 {
        iter.fold(Wrench2::ZERO, Add::add)
    }
}
