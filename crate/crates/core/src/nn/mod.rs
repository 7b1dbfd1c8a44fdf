//! Dense networks in `f64`: MLP forward/backward, Adam, squashed Gaussian policy head,
//! finite-difference gradient checks and a flat checkpoint format.

mod adam;
mod checkpoint;
mod gradcheck;
mod policy;

pub use adam::Adam;
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use gradcheck::{check_gradient, grad_check, relative_error, GradCheckReport};
pub use policy::{policy_backward, policy_sample, PolicySample, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NnError {
    #[error("expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("network dimensions must be positive")]
    EmptyLayer,
}

/// Layer widths. Hidden layers use ReLU, the output layer is linear.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Result<Self, NnError> {
        let spec = Self { input_dim, hidden, output_dim };
        if spec.widths().contains(&0) {
            return Err(NnError::EmptyLayer);
        }
        Ok(spec)
    }

    /// `[input, hidden.., output]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(self.output_dim);
        w
    }

    pub fn n_layers(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn n_params(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// `(weight offset, bias offset, fan_in, fan_out)` per layer.
    fn layout(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut off = 0;
        self.widths()
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let entry = (off, off + i * o, i, o);
                off += i * o + o;
                entry
            })
            .collect()
    }
}

/// Parameters are one flat vector; layer `l` stores its `fan_in x fan_out` row-major weight
/// matrix followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
    layout: Vec<(usize, usize, usize, usize)>,
}

/// Activations kept by [`Mlp::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Cache {
    batch: usize,
    /// Input of each layer (post-ReLU for hidden ones), plus the final output.
    acts: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Post-activation values of hidden layer `i`.
    pub fn hidden(&self, i: usize) -> &[f64] {
        &self.acts[i + 1]
    }
}

/// `c = a * b (+ c if accumulate)` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths cover every index addressed by the given shapes and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    pub fn zeros(spec: MlpSpec) -> Self {
        let layout = spec.layout();
        Self { params: vec![0.0; spec.n_params()], spec, layout }
    }

    /// He-uniform weights for ReLU layers, zero biases, smaller output layer.
    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let mut net = Self::zeros(spec);
        let n_layers = net.layout.len();
        for (l, &(w_off, _, fan_in, fan_out)) in net.layout.clone().iter().enumerate() {
            let mut bound = (6.0 / fan_in as f64).sqrt();
            if l + 1 == n_layers {
                bound *= 0.1;
            }
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for w in &mut net.params[w_off..w_off + fan_in * fan_out] {
                *w = dist.sample(rng);
            }
        }
        net
    }

    pub fn from_params(spec: MlpSpec, params: Vec<f64>) -> Result<Self, NnError> {
        if params.len() != spec.n_params() {
            return Err(NnError::Shape { expected: spec.n_params(), got: params.len() });
        }
        let layout = spec.layout();
        Ok(Self { spec, params, layout })
    }

    /// Weight matrix and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w, b, i, o) = self.layout[l];
        (&self.params[w..w + i * o], &self.params[b..b + o])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (w, b, i, o) = self.layout[l];
        let (ws, bs) = self.params[w..b + o].split_at_mut(i * o);
        (ws, bs)
    }

    /// Forward pass over a row-major `batch x input_dim` matrix.
    pub fn forward(&self, input: &[f64], batch: usize) -> Result<Cache, NnError> {
        let expected = batch * self.spec.input_dim;
        if input.len() != expected {
            return Err(NnError::Shape { expected, got: input.len() });
        }
        let mut acts = Vec::with_capacity(self.layout.len() + 1);
        acts.push(input.to_vec());
        let last = self.layout.len() - 1;
        for (l, &(w_off, b_off, fan_in, fan_out)) in self.layout.iter().enumerate() {
            let x = acts.last().expect("non-empty");
            let mut y = vec![0.0; batch * fan_out];
            let bias = &self.params[b_off..b_off + fan_out];
            for row in y.chunks_exact_mut(fan_out) {
                row.copy_from_slice(bias);
            }
            gemm(
                batch,
                fan_in,
                fan_out,
                x,
                (fan_in as isize, 1),
                &self.params[w_off..w_off + fan_in * fan_out],
                (fan_out as isize, 1),
                &mut y,
                true,
            );
            if l != last {
                for v in &mut y {
                    *v = v.max(0.0);
                }
            }
            acts.push(y);
        }
        Ok(Cache { batch, acts })
    }

    /// Output only.
    pub fn predict(&self, input: &[f64], batch: usize) -> Result<Vec<f64>, NnError> {
        let mut cache = self.forward(input, batch)?;
        Ok(cache.acts.pop().unwrap_or_default())
    }

    /// Gradients of a loss with `d loss / d output = grad_out`.
    ///
    /// Returns `(parameter gradient, input gradient)`.
    pub fn backward(&self, cache: &Cache, grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        let batch = cache.batch;
        let expected = batch * self.spec.output_dim;
        if grad_out.len() != expected {
            return Err(NnError::Shape { expected, got: grad_out.len() });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_out.to_vec();
        for l in (0..self.layout.len()).rev() {
            let (w_off, b_off, fan_in, fan_out) = self.layout[l];
            let x = &cache.acts[l];
            // dW = x^T delta
            gemm(
                fan_in,
                batch,
                fan_out,
                x,
                (1, fan_in as isize),
                &delta,
                (fan_out as isize, 1),
                &mut grads[w_off..w_off + fan_in * fan_out],
                false,
            );
            let db = &mut grads[b_off..b_off + fan_out];
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dx = delta W^T
            let mut dx = vec![0.0; batch * fan_in];
            gemm(
                batch,
                fan_out,
                fan_in,
                &delta,
                (fan_out as isize, 1),
                &self.params[w_off..w_off + fan_in * fan_out],
                (1, fan_out as isize),
                &mut dx,
                false,
            );
            if l > 0 {
                for (d, a) in dx.iter_mut().zip(x) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = dx;
        }
        Ok((grads, delta))
    }

    /// `self <- (1 - tau) self + tau other`.
    pub fn polyak_from(&mut self, other: &Mlp, tau: f64) {
        for (t, o) in self.params.iter_mut().zip(&other.params) {
            *t = (1.0 - tau) * *t + tau * o;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Per-element oracle.
    fn naive_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n = net.spec.n_layers();
        for l in 0..n {
            let (w, b) = net.layer(l);
            let (fi, fo) = (a.len(), b.len());
            let mut y = b.to_vec();
            for j in 0..fo {
                for i in 0..fi {
                    y[j] += a[i] * w[i * fo + j];
                }
            }
            if l + 1 < n {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            a = y;
        }
        a
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(MlpSpec::new(3, vec![4], 2).unwrap());
        assert_eq!(net.predict(&[1.0, -2.0, 3.0], 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn affine_one_by_one() {
        let net = Mlp::from_params(MlpSpec::new(1, vec![], 1).unwrap(), vec![2.0, 1.0]).unwrap();
        assert_eq!(net.predict(&[3.0], 1).unwrap(), vec![7.0]);
    }

    #[test]
    fn batched_forward_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::init(MlpSpec::new(5, vec![7, 6], 3).unwrap(), &mut rng);
        let x: Vec<f64> = (0..5 * 9).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = net.predict(&x, 9).unwrap();
        for (row, out) in x.chunks(5).zip(y.chunks(3)) {
            for (a, b) in naive_forward(&net, row).iter().zip(out) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let net = Mlp::zeros(MlpSpec::new(3, vec![4], 2).unwrap());
        assert!(matches!(net.forward(&[1.0; 5], 2), Err(NnError::Shape { expected: 6, got: 5 })));
        let cache = net.forward(&[1.0; 3], 1).unwrap();
        assert!(net.backward(&cache, &[1.0; 3]).is_err());
        assert_eq!(MlpSpec::new(0, vec![], 1), Err(NnError::EmptyLayer));
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(MlpSpec::new(4, vec![5], 2).unwrap(), &mut rng);
        let cache = net.forward(&[0.5; 8], 2).unwrap();
        let (g, dx) = net.backward(&cache, &[0.0; 4]).unwrap();
        assert!(g.iter().chain(&dx).all(|v| *v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let spec = MlpSpec::new(2, vec![], 3).unwrap();
        let net = Mlp::from_params(spec, vec![0.1; 9]).unwrap();
        let cache = net.forward(&[2.0, -1.0], 1).unwrap();
        let (g, _) = net.backward(&cache, &[1.0, 0.5, -2.0]).unwrap();
        assert_eq!(&g[..6], &[2.0, 1.0, -4.0, -1.0, -0.5, 2.0]);
        assert_eq!(&g[6..], &[1.0, 0.5, -2.0]);
    }

    #[test]
    fn polyak_extremes_and_midpoint() {
        let spec = MlpSpec::new(1, vec![], 1).unwrap();
        let online = Mlp::from_params(spec.clone(), vec![1.0, 1.0]).unwrap();
        let mut target = Mlp::from_params(spec, vec![0.0, 0.0]).unwrap();
        let before = target.clone();
        target.polyak_from(&online, 0.0);
        assert_eq!(target, before);
        target.polyak_from(&online, 0.5);
        target.polyak_from(&online, 0.5);
        assert_eq!(target.params, vec![0.75, 0.75]);
        target.polyak_from(&online, 1.0);
        assert_eq!(target.params, online.params);
    }
}
