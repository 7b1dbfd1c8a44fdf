use serde::{Deserialize, Serialize};

use super::SimError;
use crate::se2::{compose, inverse, Pose2};

/// The grasped plate: a rectangle rigidly attached to the end-effector.
///
/// The fused gripper+plate body has its center of mass at the end-effector origin;
/// `inertia` is taken about that point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateShape {
    /// Half of the plate thickness, along the plate x axis.
    pub half_width: f64,
    /// Half of the plate diameter, along the plate z axis.
    pub half_height: f64,
    pub mass: f64,
    pub inertia: f64,
    /// End-effector frame expressed in the plate-center frame.
    pub grasp_offset: Pose2,
}

impl Default for PlateShape {
    fn default() -> Self {
        Self {
            half_width: 0.005,
            half_height: 0.115,
            mass: 0.5,
            inertia: 8e-3,
            grasp_offset: Pose2::translation(0.0, 0.10),
        }
    }
}

impl PlateShape {
    /// Inertia of a uniform rectangle with this mass and size about its center.
    pub fn rectangle_inertia(&self) -> f64 {
        let w = 2.0 * self.half_width;
        let h = 2.0 * self.half_height;
        self.mass * (w * w + h * h) / 12.0
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [self.half_width, self.half_height, self.mass, self.inertia];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::InvalidShape("plate dimensions, mass and inertia must be positive".into()));
        }
        let rect = self.rectangle_inertia();
        if self.inertia < rect / 10.0 || self.inertia > rect * 10.0 {
            return Err(SimError::InvalidShape(format!(
                "inertia {} is not within a factor of 10 of the rectangle value {rect}",
                self.inertia
            )));
        }
        if !self.grasp_offset.is_finite() {
            return Err(SimError::InvalidShape("grasp offset must be finite".into()));
        }
        Ok(())
    }

    /// Pose of the plate center given the end-effector pose.
    pub fn plate_pose(&self, ee: Pose2) -> Pose2 {
        compose(ee, inverse(self.grasp_offset))
    }

    /// End-effector pose that puts the plate center at `plate`.
    pub fn ee_pose(&self, plate: Pose2) -> Pose2 {
        compose(plate, self.grasp_offset)
    }

    /// Plate corners in the base frame, ordered bottom-left, bottom-right, top-right, top-left
    /// in the plate frame.
    pub fn corners(&self, ee: Pose2) -> [[f64; 2]; 4] {
        let plate = self.plate_pose(ee);
        let (w, h) = (self.half_width, self.half_height);
        [[-w, -h], [w, -h], [w, h], [-w, h]].map(|c| plate.transform_point(c))
    }

    /// Lowest point of the plate.
    pub fn bottom_z(&self, ee: Pose2) -> f64 {
        self.corners(ee).iter().map(|c| c[1]).fold(f64::INFINITY, f64::min)
    }

    /// Vertical distance from the plate bottom to the end-effector origin when upright.
    pub fn ee_height_above_bottom(&self) -> f64 {
        self.half_height + self.grasp_offset.z
    }
}

/// A one-sided static segment. The solid side lies to the right of `a -> b`; the free
/// side (and the contact normal) points to the left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    pub fn tangent(&self) -> [f64; 2] {
        let l = self.length();
        [(self.b[0] - self.a[0]) / l, (self.b[1] - self.a[1]) / l]
    }

    pub fn normal(&self) -> [f64; 2] {
        let t = self.tangent();
        [-t[1], t[0]]
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub center: [f64; 2],
    pub half_extents: [f64; 2],
}

impl Aabb {
    pub fn min(&self) -> [f64; 2] {
        [self.center[0] - self.half_extents[0], self.center[1] - self.half_extents[1]]
    }

    pub fn max(&self) -> [f64; 2] {
        [self.center[0] + self.half_extents[0], self.center[1] + self.half_extents[1]]
    }

    pub fn vertices(&self) -> [[f64; 2]; 4] {
        let lo = self.min();
        let hi = self.max();
        [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
    }

    pub fn contains_strict(&self, p: [f64; 2]) -> bool {
        let lo = self.min();
        let hi = self.max();
        p[0] > lo[0] && p[0] < hi[0] && p[1] > lo[1] && p[1] < hi[1]
    }
}

/// Static scene: table floor, slot walls and an optional blocking object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldGeometry {
    pub segments: Vec<Segment>,
    pub walls: Vec<Aabb>,
    pub slot_centers_x: Vec<f64>,
    pub slot_floor_z: f64,
    pub slot_top_z: f64,
    pub blocker: Option<Aabb>,
}

impl WorldGeometry {
    /// All solid boxes, walls first.
    pub fn boxes(&self) -> impl Iterator<Item = &Aabb> {
        self.walls.iter().chain(self.blocker.iter())
    }

    pub fn slot_pitch(&self) -> Option<f64> {
        match self.slot_centers_x.as_slice() {
            [a, b, ..] => Some(b - a),
            _ => None,
        }
    }

    /// Index and signed offset of the slot center closest to `x`.
    pub fn nearest_slot(&self, x: f64) -> Option<(usize, f64)> {
        self.slot_centers_x.iter().enumerate().map(|(i, c)| (i, x - c)).min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    }

    pub fn validate(&self, plate: &PlateShape) -> Result<(), SimError> {
        let xs = &self.slot_centers_x;
        if xs.is_empty() {
            return Err(SimError::InvalidWorld("at least one slot is required".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::InvalidWorld("slot centers must be strictly increasing".into()));
        }
        if let Some(pitch) = self.slot_pitch() {
            if xs.windows(2).any(|w| ((w[1] - w[0]) - pitch).abs() > 1e-9) {
                return Err(SimError::InvalidWorld("slot pitch must be uniform".into()));
            }
        }
        for (i, c) in xs.iter().enumerate() {
            let opening = self.slot_opening(i);
            if opening <= 2.0 * plate.half_width {
                return Err(SimError::InvalidWorld(format!(
                    "slot {i} at x={c} has opening {opening} m, not wider than the plate"
                )));
            }
        }
        Ok(())
    }

    /// Free width of slot `i`, between the inner faces of its neighbouring walls.
    pub fn slot_opening(&self, i: usize) -> f64 {
        let c = self.slot_centers_x[i];
        let left = self.walls.iter().filter(|w| w.center[0] < c).map(|w| w.max()[0]).fold(f64::NEG_INFINITY, f64::max);
        let right = self.walls.iter().filter(|w| w.center[0] > c).map(|w| w.min()[0]).fold(f64::INFINITY, f64::min);
        right - left
    }
}

/// Parameters of a blocking object standing on the floor of a slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockerSpec {
    pub slot: usize,
    pub half_width: f64,
    pub height: f64,
}

/// Parametric holder layout; `spawn_world` turns it into geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldLayout {
    pub n_slots: usize,
    pub slot_pitch: f64,
    pub wall_thickness: f64,
    pub wall_height: f64,
    pub floor_z: f64,
    pub floor_half_length: f64,
    pub blocker_half_width: f64,
    pub blocker_height: f64,
}

impl Default for WorldLayout {
    fn default() -> Self {
        Self {
            n_slots: 3,
            slot_pitch: 0.10,
            wall_thickness: 0.01,
            wall_height: 0.06,
            floor_z: 0.0,
            floor_half_length: 1.0,
            blocker_half_width: 0.04,
            blocker_height: 0.10,
        }
    }
}

impl WorldLayout {
    pub fn slot_center(&self, i: usize) -> f64 {
        (i as f64 - (self.n_slots as f64 - 1.0) / 2.0) * self.slot_pitch
    }

    pub fn slot_opening(&self) -> f64 {
        self.slot_pitch - self.wall_thickness
    }
}

/// Builds the table floor, `n_slots + 1` walls and an optional blocker in `blocker_slot`.
pub fn spawn_world(
    layout: &WorldLayout,
    plate: &PlateShape,
    blocker_slot: Option<usize>,
) -> Result<WorldGeometry, SimError> {
    let dims = [layout.slot_pitch, layout.wall_thickness, layout.wall_height, layout.floor_half_length];
    if layout.n_slots == 0 || dims.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(SimError::InvalidWorld("layout parameters must be positive".into()));
    }
    if layout.slot_opening() <= 2.0 * plate.half_width {
        return Err(SimError::InvalidWorld(format!(
            "slot opening {} m does not exceed plate thickness {} m",
            layout.slot_opening(),
            2.0 * plate.half_width
        )));
    }
    let floor = layout.floor_z;
    let top = floor + layout.wall_height;
    let slot_centers_x: Vec<f64> = (0..layout.n_slots).map(|i| layout.slot_center(i)).collect();
    let walls = (0..=layout.n_slots)
        .map(|i| Aabb {
            center: [layout.slot_center(i) - layout.slot_pitch / 2.0, floor + layout.wall_height / 2.0],
            half_extents: [layout.wall_thickness / 2.0, layout.wall_height / 2.0],
        })
        .collect();
    let blocker = match blocker_slot {
        None => None,
        Some(slot) if slot >= layout.n_slots => {
            return Err(SimError::InvalidWorld(format!(
                "blocker slot {slot} out of range for {} slots",
                layout.n_slots
            )))
        }
        Some(slot) => {
            if !(layout.blocker_half_width > 0.0 && layout.blocker_height > 0.0) {
                return Err(SimError::InvalidWorld("blocker dimensions must be positive".into()));
            }
            if 2.0 * layout.blocker_half_width >= layout.slot_opening() {
                return Err(SimError::InvalidWorld("blocker does not fit inside the slot opening".into()));
            }
            Some(Aabb {
                center: [slot_centers_x[slot], floor + layout.blocker_height / 2.0],
                half_extents: [layout.blocker_half_width, layout.blocker_height / 2.0],
            })
        }
    };
    let l = layout.floor_half_length;
    let world = WorldGeometry {
        segments: vec![Segment::new([-l, floor], [l, floor])],
        walls,
        slot_centers_x,
        slot_floor_z: floor,
        slot_top_z: top,
        blocker,
    };
    world.validate(plate)?;
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_layout_has_three_slots_ten_cm_apart() {
        let w = spawn_world(&WorldLayout::default(), &PlateShape::default(), None).unwrap();
        assert_eq!(w.slot_centers_x.len(), 3);
        for (got, want) in w.slot_centers_x.iter().zip([-0.10, 0.0, 0.10]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert_eq!(w.walls.len(), 4);
        assert_abs_diff_eq!(w.slot_top_z, 0.06, epsilon = 1e-15);
        for i in 0..3 {
            assert_abs_diff_eq!(w.slot_opening(i), 0.09, epsilon = 1e-12);
        }
        assert!(w.blocker.is_none());
    }

    #[test]
    fn blocker_sits_inside_its_slot() {
        let w = spawn_world(&WorldLayout::default(), &PlateShape::default(), Some(1)).unwrap();
        let b = w.blocker.unwrap();
        let c = w.slot_centers_x[1];
        let half_open = w.slot_opening(1) / 2.0;
        assert!(b.min()[0] > c - half_open && b.max()[0] < c + half_open);
        assert_abs_diff_eq!(b.min()[1], w.slot_floor_z, epsilon = 1e-15);
    }

    #[test]
    fn single_slot_has_two_walls() {
        let layout = WorldLayout { n_slots: 1, ..WorldLayout::default() };
        let w = spawn_world(&layout, &PlateShape::default(), None).unwrap();
        assert_eq!(w.walls.len(), 2);
        assert_eq!(w.slot_centers_x, vec![0.0]);
    }

    #[test]
    fn rejects_opening_narrower_than_plate() {
        let layout = WorldLayout { slot_pitch: 0.019, wall_thickness: 0.01, ..WorldLayout::default() };
        assert!(matches!(spawn_world(&layout, &PlateShape::default(), None), Err(SimError::InvalidWorld(_))));
        // exactly equal is still rejected
        let layout = WorldLayout { slot_pitch: 0.02, wall_thickness: 0.01, ..WorldLayout::default() };
        assert!(spawn_world(&layout, &PlateShape::default(), None).is_err());
    }

    #[test]
    fn rejects_out_of_range_blocker() {
        assert!(spawn_world(&WorldLayout::default(), &PlateShape::default(), Some(3)).is_err());
    }

    #[test]
    fn plate_shape_sanity_bound() {
        let p = PlateShape::default();
        p.validate().unwrap();
        let bad = PlateShape { inertia: p.rectangle_inertia() * 11.0, ..p };
        assert!(bad.validate().is_err());
        let bad = PlateShape { mass: 0.0, ..p };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn corners_and_grasp_offset() {
        let p = PlateShape::default();
        let ee = Pose2::new(0.0, 0.215, 0.0);
        let c = p.corners(ee);
        assert_abs_diff_eq!(c[0][0], -0.005, epsilon = 1e-15);
        assert_abs_diff_eq!(c[0][1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c[2][1], 0.23, epsilon = 1e-15);
        assert_abs_diff_eq!(p.bottom_z(ee), 0.0, epsilon = 1e-15);
        let back = p.ee_pose(p.plate_pose(ee));
        assert_abs_diff_eq!(back.z, ee.z, epsilon = 1e-15);
    }
}
