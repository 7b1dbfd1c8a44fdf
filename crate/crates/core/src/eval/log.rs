//! JSON-lines episode logs and open-loop replay.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::env::{EnvConfig, InsertionEnv, StepResult, Termination};
use crate::se2::{Pose2, Wrench2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub target_slot: usize,
    pub blocker_slot: Option<usize>,
    /// Goal perturbation, `noisy_goal = true_goal * noise`.
    pub noise: Pose2,
    pub start: Pose2,
    pub true_goal: Pose2,
    pub noisy_goal: Pose2,
}

impl InitialConditions {
    pub fn of(env: &InsertionEnv) -> Self {
        let ep = env.episode();
        Self {
            target_slot: ep.target_slot,
            blocker_slot: ep.blocker_slot,
            noise: ep.noise,
            start: ep.body.pose,
            true_goal: ep.true_goal,
            noisy_goal: ep.noisy_goal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub episode: u64,
    pub slot: usize,
    pub trial: usize,
    pub seed: u64,
    pub policy: String,
    pub build: String,
    pub initial: InitialConditions,
    pub config: EnvConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u64,
    pub step: usize,
    /// Action as emitted by the policy, before clamping.
    pub action: Vec<f64>,
    pub delay: usize,
    pub target: Pose2,
    pub pose: Pose2,
    pub wrench: Wrench2,
    pub reward: f64,
    pub success_counter: usize,
    pub jam_counter: usize,
    pub terminated: Termination,
    pub truncated: bool,
}

impl StepRecord {
    pub fn new(episode: u64, step: usize, action: &[f64], r: &StepResult) -> Self {
        Self {
            episode,
            step,
            action: action.to_vec(),
            delay: r.info.delay,
            target: r.info.target,
            pose: r.info.pose,
            wrench: r.info.wrench,
            reward: r.reward,
            success_counter: r.info.success_counter,
            jam_counter: r.info.jam_counter,
            terminated: r.terminated,
            truncated: r.truncated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header(Box<EpisodeHeader>),
    Step(StepRecord),
}

pub fn write_record(w: &mut dyn Write, record: &LogRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *w, record).map_err(io::Error::from)?;
    w.write_all(b"\n")
}

/// A header and its steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LoggedEpisode {
    pub header: EpisodeHeader,
    pub steps: Vec<StepRecord>,
}

pub fn parse_records(r: impl BufRead) -> Result<Vec<LogRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| EvalError::Log(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Groups records into episodes; steps must follow their header.
pub fn group_episodes(records: Vec<LogRecord>) -> Result<Vec<LoggedEpisode>, EvalError> {
    let mut out: Vec<LoggedEpisode> = Vec::new();
    for rec in records {
        match rec {
            LogRecord::Header(h) => out.push(LoggedEpisode { header: *h, steps: Vec::new() }),
            LogRecord::Step(s) => match out.last_mut() {
                Some(ep) if ep.header.episode == s.episode => ep.steps.push(s),
                _ => return Err(EvalError::Log(format!("step for episode {} without header", s.episode))),
            },
        }
    }
    Ok(out)
}

pub fn read_episodes(r: impl BufRead) -> Result<Vec<LoggedEpisode>, EvalError> {
    group_episodes(parse_records(r)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplayCheck {
    pub steps: usize,
    /// Largest per-component pose difference between log and replay.
    pub max_pose_error: f64,
}

/// Re-runs the logged actions and delays open-loop from the logged initial conditions.
pub fn replay_episode(ep: &LoggedEpisode) -> Result<(ReplayCheck, Vec<Pose2>), EvalError> {
    let h = &ep.header;
    let mut env = InsertionEnv::new(h.config.clone())?;
    env.reset_to(h.initial.target_slot, h.initial.blocker_slot, h.initial.noise, h.initial.start)?;
    let mut poses = vec![h.initial.start];
    let mut worst: f64 = 0.0;
    for s in &ep.steps {
        let r = env.step_with_delay(&s.action, s.delay)?;
        let (a, b) = (r.info.pose.to_array(), s.pose.to_array());
        for i in 0..3 {
            worst = worst.max((a[i] - b[i]).abs());
        }
        poses.push(r.info.pose);
    }
    Ok((ReplayCheck { steps: ep.steps.len(), max_pose_error: worst }, poses))
}
