use super::Mlp;

/// Relative errors below this magnitude floor are measured against the floor instead.
const REL_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose perturbation flipped a ReLU and were skipped.
    pub excluded: usize,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `analytic` against central differences of `f` at `x`.
pub fn check_gradient(
    x: &[f64],
    analytic: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
    h: f64,
    tol: f64,
) -> GradCheckReport {
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * h)));
    }
    GradCheckReport { max_rel_error: worst, checked: x.len(), excluded: 0, passed: worst < tol }
}

fn relu_pattern(net: &Mlp, input: &[f64], batch: usize) -> Vec<bool> {
    let cache = net.forward(input, batch).expect("shape checked by caller");
    (0..net.spec.hidden.len()).flat_map(|i| cache.hidden(i).iter().map(|v| *v > 0.0).collect::<Vec<_>>()).collect()
}

/// Checks [`Mlp::backward`] for every parameter against central differences of
/// `loss(output) -> (value, d value / d output)`.
pub fn grad_check(
    net: &Mlp,
    input: &[f64],
    batch: usize,
    loss: impl Fn(&[f64]) -> (f64, Vec<f64>),
    h: f64,
    tol: f64,
) -> GradCheckReport {
    let cache = net.forward(input, batch).expect("input width must match the network");
    let (_, grad_out) = loss(cache.output());
    let (analytic, _) = net.backward(&cache, &grad_out).expect("loss gradient width");
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let mut excluded = 0;
    for (i, &g) in analytic.iter().enumerate() {
        let orig = net.params[i];
        probe.params[i] = orig + h;
        let up_pattern = relu_pattern(&probe, input, batch);
        let up = loss(&probe.predict(input, batch).expect("shape")).0;
        probe.params[i] = orig - h;
        let down_pattern = relu_pattern(&probe, input, batch);
        let down = loss(&probe.predict(input, batch).expect("shape")).0;
        probe.params[i] = orig;
        if up_pattern != down_pattern {
            excluded += 1;
            continue;
        }
        worst = worst.max(relative_error(g, (up - down) / (2.0 * h)));
    }
    GradCheckReport { max_rel_error: worst, checked: net.params.len() - excluded, excluded, passed: worst < tol }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::MlpSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn squared(out: &[f64]) -> (f64, Vec<f64>) {
        (0.5 * out.iter().map(|v| v * v).sum::<f64>(), out.to_vec())
    }

    #[test]
    fn linear_single_parameter_is_exact() {
        let net = Mlp::from_params(MlpSpec::new(1, vec![], 1).unwrap(), vec![1.5, 0.0]).unwrap();
        let r = grad_check(&net, &[2.0], 1, squared, 1e-6, 1e-9);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn two_layer_relu_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Mlp::init(MlpSpec::new(6, vec![16], 3).unwrap(), &mut rng);
        let x: Vec<f64> = (0..6 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = grad_check(&net, &x, 4, squared, 1e-6, 1e-5);
        assert!(r.passed, "{r:?}");
        assert!(r.checked > 0);
    }

    #[test]
    fn kink_is_excluded_not_failed() {
        // hidden unit pre-activation is exactly zero for this input
        let spec = MlpSpec::new(1, vec![1], 1).unwrap();
        let net = Mlp::from_params(spec, vec![1.0, -1.0, 1.0, 0.0]).unwrap();
        let r = grad_check(&net, &[1.0], 1, |o| (o[0], vec![1.0]), 1e-6, 1e-9);
        assert!(r.excluded >= 1);
        assert!(r.passed, "{r:?}");
    }
}
