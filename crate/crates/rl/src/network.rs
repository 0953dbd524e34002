//! Policy/value MLP with a shared feature layer.
//!
//! ```text
//! obs -> Linear(input, shared) -> act -+-> Linear(shared, head) -> act -> Linear(head, actions)  logits
//!                                      +-> Linear(shared, head) -> act -> Linear(head, 1)        value
//! ```
//!
//! All parameters live in one flat vector so the optimizer, gradient checks
//! and checkpoints can treat them uniformly.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("expected observations of length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Relu => z.mapv_inplace(|x| x.max(0.0)),
        }
    }

    /// Multiplies `grad` by the derivative, given the activation output.
    fn backprop(self, grad: &mut Array2<f64>, out: &Array2<f64>) {
        match self {
            Activation::Tanh => grad.zip_mut_with(out, |g, &h| *g *= 1.0 - h * h),
            Activation::Relu => grad.zip_mut_with(out, |g, &h| {
                if h <= 0.0 {
                    *g = 0.0
                }
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input: usize,
    pub shared: usize,
    pub head: usize,
    pub actions: usize,
    pub activation: Activation,
}

impl NetConfig {
    pub fn new(input: usize, actions: usize) -> Self {
        Self { input, shared: 256, head: 128, actions, activation: Activation::Tanh }
    }

    /// (rows, cols) of each weight matrix; each has a bias of `rows`.
    fn layer_shapes(&self) -> [(usize, usize); 5] {
        [
            (self.shared, self.input),
            (self.head, self.shared),
            (self.actions, self.head),
            (self.head, self.shared),
            (1, self.head),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }
}

const SHARED: usize = 0;
const POLICY_HIDDEN: usize = 1;
const POLICY_OUT: usize = 2;
const VALUE_HIDDEN: usize = 3;
const VALUE_OUT: usize = 4;

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: Array2<f64>,
    shared: Array2<f64>,
    policy_hidden: Array2<f64>,
    value_hidden: Array2<f64>,
    pub logits: Array2<f64>,
    pub values: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyValueNet {
    config: NetConfig,
    offsets: [usize; 5],
    params: Array1<f64>,
}

impl PolicyValueNet {
    /// Weights drawn from N(0, 1/fan_in); the policy output layer is scaled
    /// by 0.01 so the initial policy is close to uniform. Biases start at 0.
    pub fn new<R: Rng>(config: NetConfig, rng: &mut R) -> Self {
        let mut net = Self::zeros(config);
        for (i, &(rows, cols)) in net.config.layer_shapes().iter().enumerate() {
            let scale = if i == POLICY_OUT { 0.01 } else { 1.0 };
            let normal = Normal::new(0.0, scale / (cols as f64).sqrt()).expect("finite std");
            let (mut w, _) = net.layer_mut(i);
            for x in w.iter_mut() {
                *x = normal.sample(rng);
            }
            debug_assert_eq!(w.dim(), (rows, cols));
        }
        net
    }

    pub fn zeros(config: NetConfig) -> Self {
        let mut offsets = [0; 5];
        let mut at = 0;
        for (i, (r, c)) in config.layer_shapes().iter().enumerate() {
            offsets[i] = at;
            at += r * c + r;
        }
        Self { params: Array1::zeros(at), offsets, config }
    }

    pub fn from_params(config: NetConfig, params: Vec<f64>) -> Result<Self, NetworkError> {
        let mut net = Self::zeros(config);
        if params.len() != net.params.len() {
            return Err(NetworkError::ParameterCount { expected: net.params.len(), got: params.len() });
        }
        net.params = Array1::from(params);
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> ArrayView1<'_, f64> {
        self.params.view()
    }

    pub fn params_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        self.params.view_mut()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn split(&self, i: usize) -> (usize, usize, usize) {
        let (rows, cols) = self.config.layer_shapes()[i];
        (self.offsets[i], rows, cols)
    }

    fn layer(&self, i: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (off, rows, cols) = self.split(i);
        let p = self.params.as_slice().expect("contiguous");
        let w = ArrayView2::from_shape((rows, cols), &p[off..off + rows * cols]).expect("layer shape");
        let b = ArrayView1::from(&p[off + rows * cols..off + rows * cols + rows]);
        (w, b)
    }

    fn layer_mut(&mut self, i: usize) -> (ArrayViewMut2<'_, f64>, ArrayViewMut1<'_, f64>) {
        let (off, rows, cols) = self.split(i);
        let p = self.params.as_slice_mut().expect("contiguous");
        let (w, rest) = p[off..off + rows * cols + rows].split_at_mut(rows * cols);
        (ArrayViewMut2::from_shape((rows, cols), w).expect("layer shape"), ArrayViewMut1::from(rest))
    }

    fn linear(&self, i: usize, x: &ArrayView2<f64>) -> Array2<f64> {
        let (w, b) = self.layer(i);
        let mut z = x.dot(&w.t());
        z += &b;
        z
    }

    /// Forward pass over a batch of observations, one per row.
    pub fn forward(&self, observations: ArrayView2<f64>) -> Result<ForwardCache, NetworkError> {
        if observations.ncols() != self.config.input {
            return Err(NetworkError::ShapeMismatch { expected: self.config.input, got: observations.ncols() });
        }
        let act = self.config.activation;
        let mut shared = self.linear(SHARED, &observations);
        act.apply(&mut shared);
        let mut policy_hidden = self.linear(POLICY_HIDDEN, &shared.view());
        act.apply(&mut policy_hidden);
        let logits = self.linear(POLICY_OUT, &policy_hidden.view());
        let mut value_hidden = self.linear(VALUE_HIDDEN, &shared.view());
        act.apply(&mut value_hidden);
        let values = self.linear(VALUE_OUT, &value_hidden.view()).remove_axis(Axis(1));
        Ok(ForwardCache { input: observations.to_owned(), shared, policy_hidden, value_hidden, logits, values })
    }

    /// Logits and value for a single observation.
    pub fn forward_one(&self, observation: &[f64]) -> Result<(Vec<f64>, f64), NetworkError> {
        let x = ArrayView2::from_shape((1, observation.len()), observation).expect("row shape");
        let cache = self.forward(x)?;
        Ok((cache.logits.row(0).to_vec(), cache.values[0]))
    }

    /// Gradient of a loss with respect to every parameter, given the loss
    /// gradients at the logits and values of a cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &Array2<f64>, d_values: &Array1<f64>) -> Array1<f64> {
        let act = self.config.activation;
        let mut grad = Array1::zeros(self.params.len());
        let g = grad.as_slice_mut().expect("contiguous");
        let mut write = |i: usize, dz: &Array2<f64>, input: &Array2<f64>| {
            let (off, rows, cols) = self.split(i);
            let dw = dz.t().dot(input);
            let db = dz.sum_axis(Axis(0));
            g[off..off + rows * cols].copy_from_slice(dw.as_standard_layout().as_slice().expect("contiguous"));
            g[off + rows * cols..off + rows * cols + rows].copy_from_slice(db.as_slice().expect("contiguous"));
        };

        write(POLICY_OUT, d_logits, &cache.policy_hidden);
        let mut d_policy = d_logits.dot(&self.layer(POLICY_OUT).0);
        act.backprop(&mut d_policy, &cache.policy_hidden);
        write(POLICY_HIDDEN, &d_policy, &cache.shared);

        let d_values = d_values.view().insert_axis(Axis(1)).to_owned();
        write(VALUE_OUT, &d_values, &cache.value_hidden);
        let mut d_value_hidden = d_values.dot(&self.layer(VALUE_OUT).0);
        act.backprop(&mut d_value_hidden, &cache.value_hidden);
        write(VALUE_HIDDEN, &d_value_hidden, &cache.shared);

        let mut d_shared = d_policy.dot(&self.layer(POLICY_HIDDEN).0);
        d_shared += &d_value_hidden.dot(&self.layer(VALUE_HIDDEN).0);
        act.backprop(&mut d_shared, &cache.shared);
        write(SHARED, &d_shared, &cache.input);
        grad
    }
}

/// Numerically stable log-softmax of one row of logits.
pub fn log_softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let lse = max + logits.fold(0.0, |s, &x| s + (x - max).exp()).ln();
    logits.mapv(|x| x - lse)
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    log_softmax(logits).mapv(f64::exp)
}

/// Samples an index from probabilities by inverse CDF.
pub fn sample_categorical<R: Rng>(probs: ArrayView1<f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> NetConfig {
        NetConfig { input: 5, shared: 7, head: 4, actions: 3, activation: Activation::Tanh }
    }

    #[test]
    fn parameter_layout() {
        let cfg = small();
        let net = PolicyValueNet::zeros(cfg.clone());
        assert_eq!(net.parameter_count(), 7 * 5 + 7 + 4 * 7 + 4 + 3 * 4 + 3 + 4 * 7 + 4 + 4 + 1);
        assert_eq!(cfg.parameter_count(), net.parameter_count());
    }

    #[test]
    fn zero_net_is_uniform() {
        let net = PolicyValueNet::zeros(NetConfig::new(10, 17));
        let (logits, value) = net.forward_one(&[0.3; 10]).unwrap();
        let p = softmax(ArrayView1::from(&logits));
        for x in p.iter() {
            assert!((x - 1.0 / 17.0).abs() < 1e-15);
        }
        assert_eq!(value, 0.0);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let net = PolicyValueNet::zeros(small());
        assert_eq!(net.forward_one(&[0.0; 4]), Err(NetworkError::ShapeMismatch { expected: 5, got: 4 }));
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = PolicyValueNet::new(small(), &mut rng);
        let x = [0.1, -0.2, 0.3, 0.0, 1.0];
        assert_eq!(net.forward_one(&x), net.forward_one(&x));
    }

    #[test]
    fn batch_rows_match_single_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = PolicyValueNet::new(small(), &mut rng);
        let rows = [[0.1, -0.2, 0.3, 0.0, 1.0], [1.0, 2.0, -1.0, 0.5, 0.0]];
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let cache = net.forward(ArrayView2::from_shape((2, 5), &flat).unwrap()).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let (l, v) = net.forward_one(r).unwrap();
            for (a, b) in l.iter().zip(cache.logits.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((v - cache.values[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_and_sampling() {
        let p = Array1::from(vec![0.0, 1.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(sample_categorical(p.view(), &mut rng), 1);
        }
        assert_eq!(argmax(Array1::from(vec![0.1, 0.5, 0.5]).view()), 1);
    }

    proptest! {
        #[test]
        fn softmax_is_a_simplex(logits in prop::collection::vec(-50.0f64..50.0, 1..20)) {
            let p = softmax(ArrayView1::from(&logits));
            prop_assert!((p.sum() - 1.0).abs() < 1e-6);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
