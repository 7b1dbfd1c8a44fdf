use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::se2::{Pose2, Twist2, Wrench2};

/// One captured observation record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// End-effector pose relative to the noisy goal.
    pub rel_pose: Pose2,
    /// Contact wrench exerted by the end-effector, base frame.
    pub wrench: Wrench2,
    /// End-effector velocity expressed in the noisy-goal frame.
    pub velocity: Twist2,
}

/// Most recent frames, newest at the front. Keeps at most `capacity` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct History {
    frames: VecDeque<Frame>,
    capacity: usize,
}

impl History {
    pub fn new(capacity: usize) -> Self {
        Self { frames: VecDeque::with_capacity(capacity.max(1)), capacity: capacity.max(1) }
    }

    /// Clears the ring and stores `first` as the only real frame.
    pub fn reset(&mut self, first: Frame) {
        self.frames.clear();
        self.frames.push_front(first);
    }

    pub fn push(&mut self, frame: Frame) {
        if self.frames.len() == self.capacity {
            self.frames.pop_back();
        }
        self.frames.push_front(frame);
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn newest(&self) -> Option<&Frame> {
        self.frames.front()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter()
    }
}

/// Flattens the `history_len` newest frames, newest first, padding with the oldest
/// stored frame. Each frame contributes `(rel_pose, wrench[, velocity])`.
///
/// Returns an empty vector when the history is empty.
pub fn build_observation(history: &History, history_len: usize, include_velocity: bool) -> Vec<f64> {
    let width = if include_velocity { 9 } else { 6 };
    let mut out = Vec::with_capacity(width * history_len);
    let Some(oldest) = history.frames.back() else {
        return out;
    };
    for i in 0..history_len {
        let f = history.frames.get(i).unwrap_or(oldest);
        out.extend_from_slice(&f.rel_pose.to_array());
        out.extend_from_slice(&f.wrench.to_array());
        if include_velocity {
            out.extend_from_slice(&[f.velocity.vx, f.velocity.vz, f.velocity.omega]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(i: f64) -> Frame {
        Frame {
            rel_pose: Pose2::new(i, 0.0, 0.0),
            wrench: Wrench2::new(0.0, i, 0.0),
            velocity: Twist2::new(0.0, 0.0, i),
        }
    }

    fn firsts(obs: &[f64], width: usize) -> Vec<f64> {
        obs.chunks(width).map(|c| c[0]).collect()
    }

    #[test]
    fn single_frame_history() {
        let mut h = History::new(1);
        h.reset(frame(1.0));
        h.push(frame(2.0));
        let obs = build_observation(&h, 1, false);
        assert_eq!(obs, vec![2.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn first_step_pads_with_initial_frame() {
        let mut h = History::new(8);
        h.reset(frame(1.0));
        let obs = build_observation(&h, 8, false);
        assert_eq!(obs.len(), 48);
        assert_eq!(firsts(&obs, 6), vec![1.0; 8]);
    }

    #[test]
    fn padding_after_three_frames() {
        let mut h = History::new(8);
        h.reset(frame(1.0));
        h.push(frame(2.0));
        h.push(frame(3.0));
        let obs = build_observation(&h, 8, false);
        assert_eq!(firsts(&obs, 6), vec![3.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn ring_drops_oldest_and_velocity_widens_frames() {
        let mut h = History::new(2);
        h.reset(frame(1.0));
        h.push(frame(2.0));
        h.push(frame(3.0));
        assert_eq!(h.len(), 2);
        let obs = build_observation(&h, 4, true);
        assert_eq!(obs.len(), 36);
        assert_eq!(firsts(&obs, 9), vec![3.0, 2.0, 2.0, 2.0]);
        assert_eq!(obs[8], 3.0);
    }
}
