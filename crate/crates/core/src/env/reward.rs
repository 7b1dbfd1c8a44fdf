use super::config::{EnvConfig, RewardConfig};
use crate::se2::{pose_error_norms, Pose2};

/// Episode-ending events that carry a one-off reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RewardEvents {
    pub success: bool,
    pub jam: bool,
}

/// Individual reward terms, summed by [`RewardTerms::total`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardTerms {
    pub time: f64,
    pub drop: f64,
    pub success: f64,
    pub distance: f64,
    pub action_change: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.time + self.drop + self.success + self.distance + self.action_change
    }
}

/// Translation (meters) and rotation (radians) magnitudes of an action change.
pub fn action_change_norms(action: [f64; 3], prev_action: [f64; 3], cfg: &EnvConfig) -> (f64, f64) {
    let dx = (action[0] - prev_action[0]) * cfg.action_scale_trans;
    let dz = (action[1] - prev_action[1]) * cfg.action_scale_trans;
    let dr = (action[2] - prev_action[2]) * cfg.action_scale_rot;
    (dx.hypot(dz), dr.abs())
}

pub fn reward_terms(
    rel_pose_true: Pose2,
    action: [f64; 3],
    prev_action: [f64; 3],
    events: RewardEvents,
    cfg: &EnvConfig,
) -> RewardTerms {
    let r: &RewardConfig = &cfg.reward;
    let (et, er) = pose_error_norms(rel_pose_true);
    let (at, ar) = action_change_norms(action, prev_action, cfg);
    RewardTerms {
        time: -1.0 / cfg.horizon as f64,
        drop: if events.jam { r.drop_penalty } else { 0.0 },
        success: if events.success { r.success_reward } else { 0.0 },
        distance: -(r.k_dist_trans * r.lambda_dist_trans.min(et) + r.k_dist_rot * r.lambda_dist_rot.min(er)),
        action_change: -(r.k_action_trans * r.lambda_action_trans.min(at)
            + r.k_action_rot * r.lambda_action_rot.min(ar)),
    }
}

/// Per-step reward from the pose relative to the true goal and the action change.
pub fn reward(
    rel_pose_true: Pose2,
    action: [f64; 3],
    prev_action: [f64; 3],
    events: RewardEvents,
    cfg: &EnvConfig,
) -> f64 {
    reward_terms(rel_pose_true, action, prev_action, events, cfg).total()
}

/// Smallest reward a step without events can produce, with every penalty at its cutoff.
pub fn min_step_reward(cfg: &EnvConfig) -> f64 {
    let r = &cfg.reward;
    -1.0 / cfg.horizon as f64
        - r.k_dist_trans * r.lambda_dist_trans
        - r.k_dist_rot * r.lambda_dist_rot
        - r.k_action_trans * r.lambda_action_trans
        - r.k_action_rot * r.lambda_action_rot
}
