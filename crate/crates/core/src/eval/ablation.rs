//! Train-and-evaluate grid over observation, delay and noise-curriculum variants.

use serde::{Deserialize, Serialize};

use super::{run_evaluation, train_insertion, EvalProtocol, EvalReport, TrainSetup};
use crate::env::Curriculum;
use crate::policy::LearnedPolicy;

/// Changes applied to the base training setup. Evaluation always uses the base delay and
/// full target noise; only the observation layout follows the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub name: String,
    pub history_len: usize,
    pub include_velocity: bool,
    /// `None` keeps the base delay range during training.
    pub train_delay: Option<(usize, usize)>,
    /// Train with the noise curriculum; otherwise with zero noise throughout.
    pub noise_curriculum: bool,
}

impl AblationVariant {
    pub fn full(name: &str) -> Self {
        Self { name: name.into(), history_len: 8, include_velocity: false, train_delay: None, noise_curriculum: true }
    }

    pub fn training_setup(&self, base: &TrainSetup) -> TrainSetup {
        let mut s = base.clone();
        s.env.history_len = self.history_len;
        s.env.include_velocity = self.include_velocity;
        if let Some(d) = self.train_delay {
            s.env.delay_range = d;
        }
        if !self.noise_curriculum {
            s.curriculum = Curriculum::constant(0.0);
        }
        s
    }

    pub fn eval_setup(&self, base: &TrainSetup) -> crate::env::EnvConfig {
        let mut e = base.env.clone();
        e.history_len = self.history_len;
        e.include_velocity = self.include_velocity;
        e
    }
}

/// H in {1, 8, 16}, velocity on, no delay, no noise curriculum.
pub fn default_grid() -> Vec<AblationVariant> {
    let f = AblationVariant::full;
    vec![
        f("full"),
        AblationVariant { history_len: 1, ..f("h1") },
        AblationVariant { history_len: 16, ..f("h16") },
        AblationVariant { include_velocity: true, ..f("velocity") },
        AblationVariant { train_delay: Some((0, 0)), ..f("no_delay") },
        AblationVariant { noise_curriculum: false, ..f("eps_off") },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    pub success_mean: f64,
    pub success_std: f64,
    pub success_rate: f64,
    pub episodes: usize,
    /// Set when training or evaluation failed; the numbers are then zero.
    pub error: Option<String>,
}

pub const ABLATION_CSV_HEADER: &str = "variant,seed,success_mean,success_std,success_rate,episodes,error";

impl AblationRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{},{}",
            self.variant,
            self.seed,
            self.success_mean,
            self.success_std,
            self.success_rate,
            self.episodes,
            self.error.as_deref().unwrap_or("").replace(',', ";")
        )
    }

    fn from_report(variant: &str, seed: u64, r: &EvalReport) -> Self {
        Self {
            variant: variant.into(),
            seed,
            success_mean: r.success_mean,
            success_std: r.success_std,
            success_rate: r.success_rate(),
            episodes: r.episodes.len(),
            error: None,
        }
    }
}

/// Trains one policy per (variant, seed) and evaluates it. A failing row is recorded and the
/// grid continues. Each row depends only on its own variant, seed and the shared inputs.
pub fn run_ablation(
    base: &TrainSetup,
    variants: &[AblationVariant],
    seeds: &[u64],
    protocol: &EvalProtocol,
    build: &str,
    mut on_row: impl FnMut(&AblationRow),
) -> Vec<AblationRow> {
    let mut rows = Vec::new();
    for v in variants {
        for &seed in seeds {
            let row = match run_row(base, v, seed, protocol, build) {
                Ok(r) => AblationRow::from_report(&v.name, seed, &r),
                Err(e) => AblationRow {
                    variant: v.name.clone(),
                    seed,
                    success_mean: 0.0,
                    success_std: 0.0,
                    success_rate: 0.0,
                    episodes: 0,
                    error: Some(e.to_string()),
                },
            };
            on_row(&row);
            rows.push(row);
        }
    }
    rows
}

fn run_row(
    base: &TrainSetup,
    v: &AblationVariant,
    seed: u64,
    protocol: &EvalProtocol,
    build: &str,
) -> Result<EvalReport, super::EvalError> {
    let setup = v.training_setup(base);
    let out = train_insertion(&setup, seed, |_, _| {})?;
    let ck = out.agent.checkpoint(setup.env.history_len, setup.env.include_velocity);
    let mut policy = LearnedPolicy::new(ck, format!("{}-seed{seed}", v.name));
    let eval_cfg = v.eval_setup(base);
    policy.check_compatible(&eval_cfg)?;
    let p = EvalProtocol { noise_fraction: 1.0, ..protocol.clone() };
    run_evaluation(&eval_cfg, &p, &mut policy, None, build)
}
