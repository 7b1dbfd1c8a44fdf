use std::f64::consts::PI;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Keeps the squash correction finite at saturation.
pub const SQUASH_EPS: f64 = 1e-6;

/// One reparameterized draw from the tanh-squashed Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySample {
    pub action: Vec<f64>,
    /// Pre-squash sample.
    pub u: Vec<f64>,
    pub std: Vec<f64>,
    pub noise: Vec<f64>,
    pub log_prob: f64,
}

/// `u = mean + std * noise`, `action = tanh(u)`; `log_std` is clamped to
/// `[LOG_STD_MIN, LOG_STD_MAX]` first.
pub fn policy_sample(mean: &[f64], log_std: &[f64], noise: &[f64]) -> PolicySample {
    assert!(mean.len() == log_std.len() && mean.len() == noise.len());
    let n = mean.len();
    let mut out = PolicySample {
        action: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        std: Vec::with_capacity(n),
        noise: noise.to_vec(),
        log_prob: 0.0,
    };
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    for i in 0..n {
        let ls = log_std[i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        let std = ls.exp();
        let u = mean[i] + std * noise[i];
        let a = u.tanh();
        out.log_prob += -0.5 * noise[i] * noise[i] - ls - half_log_2pi - (1.0 - a * a + SQUASH_EPS).ln();
        out.action.push(a);
        out.u.push(u);
        out.std.push(std);
    }
    out
}

/// Backpropagates through [`policy_sample`] with the noise held fixed.
///
/// `dl_da` is the loss gradient w.r.t. the action and `dl_dlogp` the loss weight on the
/// log-probability. Returns gradients w.r.t. `mean` and the unclamped `log_std`.
pub fn policy_backward(
    sample: &PolicySample,
    raw_log_std: &[f64],
    dl_da: &[f64],
    dl_dlogp: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = sample.action.len();
    let mut d_mean = Vec::with_capacity(n);
    let mut d_log_std = Vec::with_capacity(n);
    for i in 0..n {
        let a = sample.action[i];
        let one_minus = 1.0 - a * a;
        let dlogp_du = 2.0 * a * one_minus / (one_minus + SQUASH_EPS);
        let g_u = dl_da[i] * one_minus + dl_dlogp * dlogp_du;
        d_mean.push(g_u);
        let inside = (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw_log_std[i]);
        let g_ls = g_u * sample.std[i] * sample.noise[i] - dl_dlogp;
        d_log_std.push(if inside { g_ls } else { 0.0 });
    }
    (d_mean, d_log_std)
}
