//! Minimal dense-network substrate: forward/backward passes specialized to a
//! fixed MLP topology, a diagonal-Gaussian head, and Adam.
//!
//! There is no autodiff graph here. Backprop is written out by hand for the
//! affine + activation stack, which is the only topology the rest of the
//! system needs.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::Rng;

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 1.0;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    libm::exp(x) - 1.0
                }
            }
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative as a function of the pre-activation value.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    libm::exp(x)
                }
            }
            Activation::Tanh => {
                let t = libm::tanh(x);
                1.0 - t * t
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NnError {
    /// Input or gradient vector length does not match the network shape.
    DimMismatch { expected: usize, got: usize },
}

impl core::fmt::Display for NnError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NnError::DimMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for NnError {}

/// Fully-connected network with linear output. Weight matrices are stored
/// row-major, fan-in x fan-out: `weights[l][i * out + j]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenseNet {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub hidden_activation: Activation,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Clone, Debug)]
pub struct NetGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl NetGrads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        NetGrads {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn add(&mut self, other: &NetGrads) {
        for (a, b) in self
            .weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .zip(other.weights.iter().chain(other.biases.iter()))
        {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|g| g.iter())
            .all(|v| v.is_finite())
    }
}

/// Cached per-layer pre- and post-activation values from one forward pass.
pub struct ForwardTrace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("non-empty net")
    }
}

impl DenseNet {
    /// Scaled random init: near-orthogonal rows in expectation via
    /// N(0, gain^2 / fan_in) weights, zero biases. The final layer uses
    /// `output_gain` so e.g. a policy head can start near zero.
    pub fn init(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_gain: f64,
        rng: &mut Rng,
    ) -> Self {
        assert!(layer_sizes.len() >= 2, "need at least input and output layer");
        let n_layers = layer_sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let fan_in = layer_sizes[l];
            let fan_out = layer_sizes[l + 1];
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            let scale = gain / libm::sqrt(fan_in as f64);
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| {
                    let xi: f64 = rng.sample(StandardNormal);
                    xi * scale
                })
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        DenseNet {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NnError> {
        if input.len() != self.input_dim() {
            return Err(NnError::DimMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut trace = self.forward_trace(input)?;
        Ok(trace.post.pop().expect("non-empty net"))
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace, NnError> {
        self.check_input(input)?;
        let n_layers = self.weights.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut post = Vec::with_capacity(n_layers);
        let mut current: &[f64] = input;
        for l in 0..n_layers {
            let fan_in = self.layer_sizes[l];
            let fan_out = self.layer_sizes[l + 1];
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for i in 0..fan_in {
                let a = current[i];
                if a != 0.0 {
                    let row = &w[i * fan_out..(i + 1) * fan_out];
                    for (zj, wij) in z.iter_mut().zip(row) {
                        *zj += a * wij;
                    }
                }
            }
            let activated = if l + 1 == n_layers {
                // linear output layer
                z.clone()
            } else {
                z.iter().map(|&v| self.hidden_activation.apply(v)).collect()
            };
            pre.push(z);
            post.push(activated);
            current = post.last().unwrap();
        }
        Ok(ForwardTrace {
            input: input.to_vec(),
            pre,
            post,
        })
    }

    /// Gradients of `upstream_grad . output` w.r.t. all parameters and the input.
    pub fn backward(
        &self,
        input: &[f64],
        upstream_grad: &[f64],
    ) -> Result<(NetGrads, Vec<f64>), NnError> {
        let trace = self.forward_trace(input)?;
        let mut grads = NetGrads::zeros_like(self);
        let input_grad = self.backward_from_trace(&trace, upstream_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Backward pass from a cached forward trace; parameter gradients are
    /// accumulated into `grads`. Returns the gradient w.r.t. the input.
    pub fn backward_from_trace(
        &self,
        trace: &ForwardTrace,
        upstream_grad: &[f64],
        grads: &mut NetGrads,
    ) -> Result<Vec<f64>, NnError> {
        if upstream_grad.len() != self.output_dim() {
            return Err(NnError::DimMismatch {
                expected: self.output_dim(),
                got: upstream_grad.len(),
            });
        }
        let n_layers = self.weights.len();
        let mut delta = upstream_grad.to_vec();
        for l in (0..n_layers).rev() {
            let fan_in = self.layer_sizes[l];
            let fan_out = self.layer_sizes[l + 1];
            // output layer is linear, hidden layers pass through the activation
            if l + 1 != n_layers {
                for (d, &z) in delta.iter_mut().zip(trace.pre[l].iter()) {
                    *d *= self.hidden_activation.derivative(z);
                }
            }
            let layer_input: &[f64] = if l == 0 { &trace.input } else { &trace.post[l - 1] };
            let w = &self.weights[l];
            let gw = &mut grads.weights[l];
            let mut input_grad = vec![0.0; fan_in];
            for i in 0..fan_in {
                let a = layer_input[i];
                let row = &w[i * fan_out..(i + 1) * fan_out];
                let grow = &mut gw[i * fan_out..(i + 1) * fan_out];
                let mut acc = 0.0;
                for j in 0..fan_out {
                    grow[j] += a * delta[j];
                    acc += row[j] * delta[j];
                }
                input_grad[i] = acc;
            }
            for (gb, d) in grads.biases[l].iter_mut().zip(delta.iter()) {
                *gb += d;
            }
            delta = input_grad;
        }
        Ok(delta)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamParams {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamParams {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for a set of parameter groups (one group per flat tensor).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
    pub params: AdamParams,
}

impl AdamState {
    pub fn new(group_lens: &[usize], params: AdamParams) -> Self {
        AdamState {
            first_moment: group_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: group_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
            params,
        }
    }

    pub fn for_net(net: &DenseNet, params: AdamParams) -> Self {
        let lens: Vec<usize> = net
            .weights
            .iter()
            .map(Vec::len)
            .chain(net.biases.iter().map(Vec::len))
            .collect();
        AdamState::new(&lens, params)
    }

    /// Bias-corrected update of one parameter group in place. `step_count`
    /// must already have been advanced for the current step.
    fn step_group(&mut self, group: usize, params: &mut [f64], grads: &[f64]) {
        let t = self.step_count as i32;
        let p = self.params;
        let bc1 = 1.0 - libm::pow(p.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(p.beta2, t as f64);
        let m = &mut self.first_moment[group];
        let v = &mut self.second_moment[group];
        for i in 0..params.len() {
            let g = grads[i];
            m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g;
            v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= p.learning_rate * m_hat / (libm::sqrt(v_hat) + p.epsilon);
        }
    }

    /// One Adam step over a whole network. A non-finite gradient anywhere
    /// skips the update and returns false.
    pub fn step_net(&mut self, net: &mut DenseNet, grads: &NetGrads) -> bool {
        if !grads.is_finite() {
            return false;
        }
        self.step_count += 1;
        let n_layers = net.weights.len();
        for l in 0..n_layers {
            let mut w = core::mem::take(&mut net.weights[l]);
            self.step_group(l, &mut w, &grads.weights[l]);
            net.weights[l] = w;
        }
        for l in 0..n_layers {
            let mut b = core::mem::take(&mut net.biases[l]);
            self.step_group(n_layers + l, &mut b, &grads.biases[l]);
            net.biases[l] = b;
        }
        true
    }

    /// One Adam step over a single flat vector (group 0).
    pub fn step_vec(&mut self, params: &mut [f64], grads: &[f64]) -> bool {
        if !grads.iter().all(|g| g.is_finite()) {
            return false;
        }
        self.step_count += 1;
        self.step_group(0, params, grads);
        true
    }
}

/// State-independent learnable log standard deviations for a Gaussian policy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianHead {
    pub log_std: Vec<f64>,
}

impl GaussianHead {
    pub fn new(dim: usize, initial_log_std: f64) -> Self {
        GaussianHead {
            log_std: vec![initial_log_std; dim],
        }
    }

    pub fn clamp(&mut self) {
        for v in self.log_std.iter_mut() {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }
}

/// Sum over dimensions of the diagonal-Gaussian log density.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], sample: &[f64]) -> f64 {
    debug_assert_eq!(mean.len(), log_std.len());
    debug_assert_eq!(mean.len(), sample.len());
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
    let mut lp = 0.0;
    for i in 0..mean.len() {
        let ls = log_std[i];
        let z = (sample[i] - mean[i]) / libm::exp(ls);
        lp += -HALF_LN_2PI - ls - 0.5 * z * z;
    }
    lp
}

/// Reparameterized sample: mean + exp(log_std) * xi, xi ~ N(0, I).
pub fn sample_gaussian(mean: &[f64], log_std: &[f64], rng: &mut Rng) -> Vec<f64> {
    mean.iter()
        .zip(log_std.iter())
        .map(|(&m, &ls)| {
            let xi: f64 = rng.sample(StandardNormal);
            m + libm::exp(ls.clamp(LOG_STD_MIN, LOG_STD_MAX)) * xi
        })
        .collect()
}

/// Entropy of a diagonal Gaussian with the given log standard deviations.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    const HALF_1_LN_2PI: f64 = 1.418_938_533_204_672_7; // 0.5 * (1 + ln(2*pi))
    log_std.iter().map(|ls| ls + HALF_1_LN_2PI).sum()
}

/// Global gradient-norm clip across several gradient sets. Returns the
/// pre-clip norm.
pub fn clip_grad_norm(grad_sets: &mut [&mut NetGrads], extra: &mut [f64], max_norm: f64) -> f64 {
    let mut sq: f64 = extra.iter().map(|g| g * g).sum();
    for g in grad_sets.iter() {
        sq += g.squared_norm();
    }
    let norm = libm::sqrt(sq);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grad_sets.iter_mut() {
            g.scale(s);
        }
        for v in extra.iter_mut() {
            *v *= s;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> Rng {
        Rng::seed_from_u64(seed)
    }

    #[test]
    fn forward_zero_weights_yields_final_bias() {
        let mut net = DenseNet::init(&[3, 4, 2], Activation::Relu, 1.0, &mut rng(0));
        for w in net.weights.iter_mut() {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        net.biases[1] = vec![0.7, -1.3];
        let out = net.forward(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.7, -1.3]);
    }

    #[test]
    fn forward_scalar_affine() {
        let net = DenseNet {
            layer_sizes: vec![1, 1],
            weights: vec![vec![2.0]],
            biases: vec![vec![0.0]],
            hidden_activation: Activation::Relu,
        };
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![6.0]);
    }

    // Second, independent evaluation of the same affine chain: per-layer
    // matrix product written column-wise instead of row-wise.
    fn affine_chain_reference(net: &DenseNet, input: &[f64]) -> Vec<f64> {
        let mut a = input.to_vec();
        let n_layers = net.weights.len();
        for l in 0..n_layers {
            let fan_in = net.layer_sizes[l];
            let fan_out = net.layer_sizes[l + 1];
            let mut z = vec![0.0; fan_out];
            for j in 0..fan_out {
                let mut acc = net.biases[l][j];
                for i in 0..fan_in {
                    acc += a[i] * net.weights[l][i * fan_out + j];
                }
                z[j] = acc;
            }
            a = if l + 1 == n_layers {
                z
            } else {
                z.iter().map(|&v| net.hidden_activation.apply(v)).collect()
            };
        }
        a
    }

    #[test]
    fn forward_matches_independent_affine_chain() {
        let mut r = rng(42);
        for act in [Activation::Relu, Activation::Elu, Activation::Tanh] {
            let net = DenseNet::init(&[5, 7, 3], act, 1.0, &mut r);
            let input: Vec<f64> = (0..5).map(|i| (i as f64) * 0.3 - 0.7).collect();
            let out = net.forward(&input).unwrap();
            let reference = affine_chain_reference(&net, &input);
            for (a, b) in out.iter().zip(reference.iter()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_dim_mismatch_rejected() {
        let net = DenseNet::init(&[3, 2], Activation::Relu, 1.0, &mut rng(0));
        assert_eq!(
            net.forward(&[1.0, 2.0]),
            Err(NnError::DimMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn backward_scalar_chain_rule() {
        let net = DenseNet {
            layer_sizes: vec![1, 1],
            weights: vec![vec![2.0]],
            biases: vec![vec![0.0]],
            hidden_activation: Activation::Relu,
        };
        let (grads, input_grad) = net.backward(&[3.0], &[1.0]).unwrap();
        assert_eq!(grads.weights[0], vec![3.0]);
        assert_eq!(grads.biases[0], vec![1.0]);
        assert_eq!(input_grad, vec![2.0]);
    }

    #[test]
    fn backward_dead_relu_kills_upstream_gradients() {
        // first-layer pre-activations all negative -> zero grads for layer 0
        let net = DenseNet {
            layer_sizes: vec![2, 2, 1],
            weights: vec![vec![-1.0, -1.0, -1.0, -1.0], vec![1.0, 1.0]],
            biases: vec![vec![-0.5, -0.5], vec![0.0]],
            hidden_activation: Activation::Relu,
        };
        let (grads, input_grad) = net.backward(&[1.0, 1.0], &[1.0]).unwrap();
        assert!(grads.weights[0].iter().all(|&g| g == 0.0));
        assert!(grads.biases[0].iter().all(|&g| g == 0.0));
        assert!(input_grad.iter().all(|&g| g == 0.0));
    }

    pub(crate) fn finite_difference_check(net: &DenseNet, input: &[f64], tol: f64) {
        let h = 1e-5;
        let upstream: Vec<f64> = (0..net.output_dim()).map(|j| 1.0 + 0.1 * j as f64).collect();
        let loss = |n: &DenseNet, x: &[f64]| -> f64 {
            n.forward(x)
                .unwrap()
                .iter()
                .zip(upstream.iter())
                .map(|(o, u)| o * u)
                .sum()
        };
        let (grads, input_grad) = net.backward(input, &upstream).unwrap();
        let mut max_rel: f64 = 0.0;
        let mut check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1.0);
            max_rel = max_rel.max((analytic - numeric).abs() / denom);
        };
        for l in 0..net.weights.len() {
            for k in 0..net.weights[l].len() {
                let mut p = net.clone();
                p.weights[l][k] += h;
                let mut m = net.clone();
                m.weights[l][k] -= h;
                check(grads.weights[l][k], loss(&p, input), loss(&m, input));
            }
            for k in 0..net.biases[l].len() {
                let mut p = net.clone();
                p.biases[l][k] += h;
                let mut m = net.clone();
                m.biases[l][k] -= h;
                check(grads.biases[l][k], loss(&p, input), loss(&m, input));
            }
        }
        for k in 0..input.len() {
            let mut xp = input.to_vec();
            xp[k] += h;
            let mut xm = input.to_vec();
            xm[k] -= h;
            check(input_grad[k], loss(net, &xp), loss(net, &xm));
        }
        assert!(max_rel < tol, "max relative error {max_rel} >= {tol}");
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng(7);
        for act in [Activation::Elu, Activation::Tanh] {
            for _ in 0..5 {
                let net = DenseNet::init(&[4, 6, 5, 3], act, 1.0, &mut r);
                let input: Vec<f64> = (0..4)
                    .map(|_| {
                        let xi: f64 = r.sample(StandardNormal);
                        xi
                    })
                    .collect();
                finite_difference_check(&net, &input, 1e-4);
            }
        }
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut r = rng(1);
        let mut net = DenseNet::init(&[3, 4, 2], Activation::Tanh, 1.0, &mut r);
        let before = net.clone();
        let mut state = AdamState::for_net(&net, AdamParams::with_lr(0.1));
        let grads = NetGrads::zeros_like(&net);
        assert!(state.step_net(&mut net, &grads));
        assert_eq!(state.step_count, 1);
        for (a, b) in net.weights.iter().zip(before.weights.iter()) {
            assert_eq!(a, b);
        }
        assert!(state.first_moment.iter().flatten().all(|&m| m == 0.0));
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // bias correction makes the first step ~ lr * sign(g) when eps << |g|
        let mut params = vec![1.0];
        let mut state = AdamState::new(&[1], AdamParams::with_lr(0.01));
        assert!(state.step_vec(&mut params, &[7.3]));
        assert!((params[0] - (1.0 - 0.01)).abs() < 1e-6, "{}", params[0]);
    }

    #[test]
    fn adam_nonfinite_gradient_skipped() {
        let mut params = vec![1.0];
        let mut state = AdamState::new(&[1], AdamParams::with_lr(0.01));
        assert!(!state.step_vec(&mut params, &[f64::NAN]));
        assert_eq!(params, vec![1.0]);
        assert_eq!(state.step_count, 0);
    }

    #[test]
    fn adam_descends_quadratic() {
        // f(x) = x^2 from x = 1, lr = 0.1
        let mut x = vec![1.0];
        let mut state = AdamState::new(&[1], AdamParams::with_lr(0.1));
        let mut history = Vec::new();
        for _ in 0..100 {
            let g = vec![2.0 * x[0]];
            state.step_vec(&mut x, &g);
            history.push(x[0].abs());
        }
        assert!(history.last().unwrap() < &0.1, "final |x| = {}", history.last().unwrap());
        // the iterate oscillates through zero, so compare the envelope:
        // the max over each successive 20-step window must shrink
        let window_max: Vec<f64> = history
            .chunks(20)
            .map(|c| c.iter().cloned().fold(0.0, f64::max))
            .collect();
        for w in window_max.windows(2) {
            assert!(w[1] < w[0], "envelope not decreasing: {window_max:?}");
        }
    }

    #[test]
    fn log_prob_standard_normal_at_mode() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp - (-0.918_938_533_204_672_8)).abs() < 1e-12);
    }

    #[test]
    fn log_prob_translation_invariant() {
        let a = gaussian_log_prob(&[0.3, -0.2], &[0.1, -0.4], &[1.0, 0.5]);
        let b = gaussian_log_prob(&[5.3, 4.8], &[0.1, -0.4], &[6.0, 5.5]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn log_prob_factorizes_over_dims() {
        let mean = [0.1, 0.2, 0.3];
        let ls = [-0.5, 0.0, 0.5];
        let x = [1.0, -1.0, 0.5];
        let joint = gaussian_log_prob(&mean, &ls, &x);
        let sum: f64 = (0..3)
            .map(|i| gaussian_log_prob(&mean[i..=i], &ls[i..=i], &x[i..=i]))
            .sum();
        assert!((joint - sum).abs() < 1e-12);
    }

    #[test]
    fn sample_vanishing_noise_returns_mean() {
        let mean = vec![0.3, -0.8];
        let s = sample_gaussian(&mean, &[-30.0, -30.0], &mut rng(3));
        for (a, b) in s.iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn sample_deterministic_under_seed() {
        let mean = vec![0.0; 4];
        let ls = vec![0.0; 4];
        let a = sample_gaussian(&mean, &ls, &mut rng(11));
        let b = sample_gaussian(&mean, &ls, &mut rng(11));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_moments_match_standard_normal() {
        let mut r = rng(5);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let s = sample_gaussian(&[0.0], &[0.0], &mut r)[0];
            sum += s;
            sumsq += s * s;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn serialization_roundtrip_bit_exact() {
        let net = DenseNet::init(&[4, 8, 3], Activation::Elu, 0.01, &mut rng(9));
        let json = serde_json::to_string(&net).unwrap();
        let back: DenseNet = serde_json::from_str(&json).unwrap();
        assert_eq!(net.layer_sizes, back.layer_sizes);
        for (a, b) in net.weights.iter().zip(back.weights.iter()) {
            assert_eq!(a, b);
        }
        for (a, b) in net.biases.iter().zip(back.biases.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn forward_repeated_calls_bit_identical() {
        let net = DenseNet::init(&[6, 10, 4], Activation::Elu, 1.0, &mut rng(13));
        let input: Vec<f64> = (0..6).map(|i| 0.1 * i as f64 - 0.2).collect();
        let a = net.forward(&input).unwrap();
        let b = net.forward(&input).unwrap();
        assert_eq!(a, b);
    }
}
