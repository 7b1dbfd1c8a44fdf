//! Penalty contacts between the plate rectangle and static world geometry.

use serde::{Deserialize, Serialize};

use super::geometry::{PlateShape, WorldGeometry};
use super::{BodyState, SimConfig};
use crate::se2::{Pose2, Wrench2};

/// Corners deeper than this behind a one-sided segment are ignored.
pub const SEGMENT_DEPTH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub position: [f64; 2],
    /// Unit direction of the normal force acting on the plate.
    pub normal: [f64; 2],
    pub penetration: f64,
    pub normal_force: f64,
    /// Signed force along `tangent()`.
    pub tangential_force: f64,
    /// Total contact force on the plate as a wrench about the end-effector origin,
    /// expressed in the base frame.
    pub force: Wrench2,
}

impl ContactPoint {
    fn unfilled(position: [f64; 2], normal: [f64; 2], penetration: f64) -> Self {
        Self { position, normal, penetration, normal_force: 0.0, tangential_force: 0.0, force: Wrench2::ZERO }
    }

    /// Normal rotated by +90 degrees.
    pub fn tangent(&self) -> [f64; 2] {
        [-self.normal[1], self.normal[0]]
    }

    /// Lever arm from the end-effector origin to the contact point.
    pub fn lever(&self, ee: Pose2) -> [f64; 2] {
        [self.position[0] - ee.x, self.position[1] - ee.z]
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Finds every penetrating (plate corner, world feature) and (world vertex, plate) pair.
///
/// Forces are left at zero; see [`contact_forces`].
pub fn detect_contacts(pose: Pose2, shape: &PlateShape, world: &WorldGeometry) -> Vec<ContactPoint> {
    let mut out = Vec::new();
    let corners = shape.corners(pose);

    for c in corners {
        for seg in &world.segments {
            let n = seg.normal();
            let rel = [c[0] - seg.a[0], c[1] - seg.a[1]];
            let depth = -dot(rel, n);
            let along = dot(rel, seg.tangent());
            if depth > 0.0 && depth <= SEGMENT_DEPTH && (0.0..=seg.length()).contains(&along) {
                out.push(ContactPoint::unfilled(c, n, depth));
            }
        }
        for b in world.boxes() {
            if !b.contains_strict(c) {
                continue;
            }
            let lo = b.min();
            let hi = b.max();
            // Ties resolve in this order, preferring the top face.
            let faces = [
                (hi[1] - c[1], [0.0, 1.0]),
                (c[0] - lo[0], [-1.0, 0.0]),
                (hi[0] - c[0], [1.0, 0.0]),
                (c[1] - lo[1], [0.0, -1.0]),
            ];
            let (depth, n) =
                faces.into_iter().fold((f64::INFINITY, [0.0, 0.0]), |best, f| if f.0 < best.0 { f } else { best });
            out.push(ContactPoint::unfilled(c, n, depth));
        }
    }

    let plate = shape.plate_pose(pose);
    let (w, h) = (shape.half_width, shape.half_height);
    for b in world.boxes() {
        for v in b.vertices() {
            let q = plate.unrotate([v[0] - plate.x, v[1] - plate.z]);
            if q[0].abs() >= w || q[1].abs() >= h {
                continue;
            }
            let faces =
                [(w - q[0], [1.0, 0.0]), (q[0] + w, [-1.0, 0.0]), (h - q[1], [0.0, 1.0]), (q[1] + h, [0.0, -1.0])];
            let (depth, n_local) =
                faces.into_iter().fold((f64::INFINITY, [0.0, 0.0]), |best, f| if f.0 < best.0 { f } else { best });
            let n_face = plate.rotate(n_local);
            // The vertex pushes the plate away from itself, against the face normal.
            out.push(ContactPoint::unfilled(v, [-n_face[0], -n_face[1]], depth));
        }
    }
    out
}

/// Normal and tangential penalty force of one contact for a given body velocity.
pub(crate) fn contact_force_components(
    c: &ContactPoint,
    ee: Pose2,
    twist: crate::se2::Twist2,
    cfg: &SimConfig,
) -> (f64, f64) {
    let vp = twist.point_velocity(c.lever(ee));
    let approach = -dot(vp, c.normal);
    let normal = (cfg.contact_stiffness * c.penetration + cfg.contact_damping * approach).max(0.0);
    let slip = dot(vp, c.tangent());
    let limit = cfg.friction_mu * normal;
    let tangential = (-cfg.tangential_damping * slip).clamp(-limit, limit);
    (normal, tangential)
}

/// Fills in spring-damper normal forces and clamped Coulomb friction at `state`'s velocity.
pub fn contact_forces(contacts: &[ContactPoint], state: &BodyState, cfg: &SimConfig) -> Vec<ContactPoint> {
    contacts
        .iter()
        .map(|c| {
            let (fn_, ft) = contact_force_components(c, state.pose, state.twist, cfg);
            let t = c.tangent();
            let f = [fn_ * c.normal[0] + ft * t[0], fn_ * c.normal[1] + ft * t[1]];
            ContactPoint {
                normal_force: fn_,
                tangential_force: ft,
                force: Wrench2::from_force_at(f, c.lever(state.pose)),
                ..*c
            }
        })
        .collect()
}

/// Wrench exerted by the end-effector on the environment through contacts only.
pub fn end_effector_wrench(contacts: &[ContactPoint]) -> Wrench2 {
    -contacts.iter().map(|c| c.force).sum::<Wrench2>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se2::Twist2;
    use crate::sim::geometry::{spawn_world, WorldLayout};
    use approx::assert_abs_diff_eq;

    fn world() -> WorldGeometry {
        spawn_world(&WorldLayout::default(), &PlateShape::default(), None).unwrap()
    }

    fn seated_pose(shape: &PlateShape, bottom: f64) -> Pose2 {
        Pose2::new(0.0, bottom + shape.ee_height_above_bottom(), 0.0)
    }

    #[test]
    fn no_contacts_above_holder() {
        let shape = PlateShape::default();
        let w = world();
        let pose = seated_pose(&shape, w.slot_top_z + 0.05);
        assert!(detect_contacts(pose, &shape, &w).is_empty());
        let pose = Pose2::new(-0.1, w.slot_top_z + 0.001 + shape.ee_height_above_bottom(), 0.0);
        assert!(detect_contacts(pose, &shape, &w).is_empty());
    }

    #[test]
    fn touching_floor_is_not_a_contact() {
        let shape = PlateShape::default();
        let w = world();
        assert!(detect_contacts(seated_pose(&shape, 0.0), &shape, &w).is_empty());
    }

    #[test]
    fn lowered_into_floor_gives_two_corner_contacts() {
        let shape = PlateShape::default();
        let w = world();
        let contacts = detect_contacts(seated_pose(&shape, -0.001), &shape, &w);
        assert_eq!(contacts.len(), 2);
        for c in &contacts {
            assert_abs_diff_eq!(c.penetration, 0.001, epsilon = 1e-12);
            assert_eq!(c.normal, [0.0, 1.0]);
            assert_abs_diff_eq!(c.position[1], -0.001, epsilon = 1e-12);
        }
        // oracle: the penetrating corners are the two bottom corners
        let xs: Vec<f64> = contacts.iter().map(|c| c.position[0]).collect();
        assert_abs_diff_eq!(xs[0], -0.005, epsilon = 1e-12);
        assert_abs_diff_eq!(xs[1], 0.005, epsilon = 1e-12);
    }

    #[test]
    fn plate_landing_on_wall_top_is_pushed_up() {
        // plate thicker than the wall, so only the wall's top vertices penetrate
        let shape = PlateShape { half_width: 0.008, ..PlateShape::default() };
        let w = world();
        let wall_x = w.walls[2].center[0];
        let pose = Pose2::new(wall_x, w.slot_top_z - 0.002 + shape.ee_height_above_bottom(), 0.0);
        let contacts = detect_contacts(pose, &shape, &w);
        assert!(!contacts.is_empty());
        for c in &contacts {
            assert!(c.normal[1] > 0.99, "normal {:?}", c.normal);
            assert_abs_diff_eq!(c.penetration, 0.002, epsilon = 1e-9);
        }
        assert_eq!(contacts.len(), 2);
    }

    #[test]
    fn wall_corner_inside_tilted_plate_side() {
        let shape = PlateShape::default();
        let w = world();
        // Plate in the middle slot shifted left so its left face overlaps the top-right
        // corner of the wall at x=-0.05.
        let inner = w.walls[1].max()[0];
        let pose =
            Pose2::new(inner + shape.half_width - 0.001, w.slot_top_z - 0.03 + shape.ee_height_above_bottom(), 0.0);
        let contacts = detect_contacts(pose, &shape, &w);
        assert!(contacts.iter().any(|c| c.normal == [1.0, 0.0] || (c.normal[0] > 0.99)));
    }

    #[test]
    fn penalty_force_values() {
        let cfg = SimConfig { contact_stiffness: 1e5, ..SimConfig::default() };
        assert!(contact_forces(&[], &BodyState::at(Pose2::IDENTITY), &cfg).is_empty());

        let c = ContactPoint::unfilled([0.0, 0.0], [0.0, 1.0], 0.001);
        let state = BodyState::at(Pose2::translation(0.0, 0.2));
        let filled = contact_forces(&[c], &state, &cfg);
        assert_abs_diff_eq!(filled[0].normal_force, 100.0, epsilon = 1e-9);
        assert_eq!(filled[0].tangential_force, 0.0);

        // separating fast enough that the raw spring-damper force would pull
        let state = BodyState { pose: Pose2::translation(0.0, 0.2), twist: Twist2::new(0.0, 1.0, 0.0) };
        let filled = contact_forces(&[c], &state, &cfg);
        assert_eq!(filled[0].normal_force, 0.0);
        assert_eq!(filled[0].force, Wrench2::ZERO);
    }

    #[test]
    fn friction_is_clamped_and_opposes_slip() {
        let cfg = SimConfig::default();
        let c = ContactPoint::unfilled([0.0, 0.0], [0.0, 1.0], 0.001);
        let state = BodyState { pose: Pose2::translation(0.0, 0.2), twist: Twist2::new(2.0, 0.0, 0.0) };
        let filled = contact_forces(&[c], &state, &cfg)[0];
        // tangent of (0,1) is (-1,0): slip along +x is negative slip along the tangent
        assert_abs_diff_eq!(filled.tangential_force.abs(), cfg.friction_mu * filled.normal_force, epsilon = 1e-9);
        assert!(filled.force.fx < 0.0);
    }

    #[test]
    fn wrench_sign_flip_and_moment_cancellation() {
        assert_eq!(end_effector_wrench(&[]), Wrench2::ZERO);
        let single = ContactPoint {
            force: Wrench2::new(0.0, 100.0, 0.0),
            ..ContactPoint::unfilled([0.0, 0.0], [0.0, 1.0], 0.0)
        };
        assert_eq!(end_effector_wrench(&[single]), Wrench2::new(0.0, -100.0, 0.0));

        // two corners at +-1 cm lever, 50 N each
        let left = ContactPoint { force: Wrench2::from_force_at([0.0, 50.0], [-0.01, -0.2]), ..single };
        let right = ContactPoint { force: Wrench2::from_force_at([0.0, 50.0], [0.01, -0.2]), ..single };
        let w = end_effector_wrench(&[left, right]);
        assert_abs_diff_eq!(w.fx, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.fz, -100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.tau, 0.0, epsilon = 1e-12);
    }
}
