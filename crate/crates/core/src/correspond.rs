//! Robot-to-Human and Human-to-Robot pose mappers, their joint
//! cycle-consistency training objective, and the correspondence reward
//! derived from the two reconstruction errors.
//!
//! Both mappers work in standardized pose coordinates: inputs and targets
//! are whitened with running statistics that are frozen while a rollout is
//! collected, so the squared-error scale is independent of physical units.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::motion::HUMAN_POSE_DIM;
use crate::nn::{Activation, AdamParams, AdamState, DenseNet, NetGrads};
use crate::sim::ROBOT_POSE_DIM;
use crate::stats::RunningMeanVar;
use crate::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorrespondError {
    DimMismatch { expected: usize, got: usize },
    EmptyBatch,
    /// Training loss went non-finite; the update was aborted.
    NonFiniteLoss,
}

impl core::fmt::Display for CorrespondError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CorrespondError::DimMismatch { expected, got } => {
                write!(f, "pose dimension mismatch: expected {expected}, got {got}")
            }
            CorrespondError::EmptyBatch => write!(f, "mapper batch is empty"),
            CorrespondError::NonFiniteLoss => write!(f, "mapper loss is non-finite, update aborted"),
        }
    }
}

impl core::error::Error for CorrespondError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapperConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    /// Weights of the two loss terms; both 1 per the cycle objective.
    pub loss_weight_r2h: f64,
    pub loss_weight_cycle: f64,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            hidden: alloc::vec![64, 64],
            epochs: 4,
            minibatch: 512,
            learning_rate: 1e-3,
            loss_weight_r2h: 1.0,
            loss_weight_cycle: 1.0,
        }
    }
}

/// The R2H and H2R mean networks plus the pose statistics they are
/// conditioned on. `sigma` is the fixed covariance of the underlying
/// Gaussian model; it cancels out of every computed quantity and is kept
/// as documentation of the probabilistic reading.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapperPair {
    pub r2h_net: DenseNet,
    pub h2r_net: DenseNet,
    pub sigma: f64,
    pub robot_stat: RunningMeanVar,
    pub human_stat: RunningMeanVar,
}

/// Timestep-aligned (p^h, p^r) pairs drawn from the rollout buffer.
#[derive(Clone, Debug, Default)]
pub struct MapperBatch {
    pub human: Vec<Vec<f64>>,
    pub robot: Vec<Vec<f64>>,
}

impl MapperBatch {
    pub fn len(&self) -> usize {
        self.human.len()
    }

    pub fn is_empty(&self) -> bool {
        self.human.is_empty()
    }

    pub fn push(&mut self, human: Vec<f64>, robot: Vec<f64>) {
        debug_assert_eq!(human.len(), HUMAN_POSE_DIM);
        debug_assert_eq!(robot.len(), ROBOT_POSE_DIM);
        self.human.push(human);
        self.robot.push(robot);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleLoss {
    pub l_r2h: f64,
    pub l_cycle: f64,
    pub l_total: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl MapperPair {
    pub fn new(hidden: &[usize], rng: &mut Rng) -> Self {
        let mut r2h_sizes = alloc::vec![ROBOT_POSE_DIM];
        r2h_sizes.extend_from_slice(hidden);
        r2h_sizes.push(HUMAN_POSE_DIM);
        let mut h2r_sizes = alloc::vec![HUMAN_POSE_DIM];
        h2r_sizes.extend_from_slice(hidden);
        h2r_sizes.push(ROBOT_POSE_DIM);
        MapperPair {
            r2h_net: DenseNet::init(&r2h_sizes, Activation::Relu, 1.0, rng),
            h2r_net: DenseNet::init(&h2r_sizes, Activation::Relu, 1.0, rng),
            sigma: 1.0,
            robot_stat: RunningMeanVar::new(ROBOT_POSE_DIM),
            human_stat: RunningMeanVar::new(HUMAN_POSE_DIM),
        }
    }

    fn check_robot(&self, p_r: &[f64]) -> Result<(), CorrespondError> {
        if p_r.len() != ROBOT_POSE_DIM {
            return Err(CorrespondError::DimMismatch {
                expected: ROBOT_POSE_DIM,
                got: p_r.len(),
            });
        }
        Ok(())
    }

    fn check_human(&self, p_h: &[f64]) -> Result<(), CorrespondError> {
        if p_h.len() != HUMAN_POSE_DIM {
            return Err(CorrespondError::DimMismatch {
                expected: HUMAN_POSE_DIM,
                got: p_h.len(),
            });
        }
        Ok(())
    }

    /// Predicted human pose mean for a raw robot pose, in raw units.
    pub fn r2h_predict(&self, p_r: &[f64]) -> Result<Vec<f64>, CorrespondError> {
        self.check_robot(p_r)?;
        let z = self.r2h_net.forward(&self.robot_stat.standardize(p_r)).expect("shape checked");
        Ok(self.human_stat.destandardize(&z))
    }

    /// Predicted robot pose mean for a raw human pose, in raw units.
    pub fn h2r_predict(&self, p_h: &[f64]) -> Result<Vec<f64>, CorrespondError> {
        self.check_human(p_h)?;
        let z = self.h2r_net.forward(&self.human_stat.standardize(p_h)).expect("shape checked");
        Ok(self.robot_stat.destandardize(&z))
    }

    /// The two squared reconstruction errors (r2h, cycle) in standardized
    /// pose space.
    pub fn reconstruction_errors(&self, p_h: &[f64], p_r: &[f64]) -> Result<(f64, f64), CorrespondError> {
        self.check_human(p_h)?;
        self.check_robot(p_r)?;
        let a = self.robot_stat.standardize(p_r);
        let h = self.human_stat.standardize(p_h);
        let h_hat = self.r2h_net.forward(&a).expect("shape checked");
        let r_hat = self.h2r_net.forward(&h_hat).expect("shape checked");
        Ok((squared_distance(&h, &h_hat), squared_distance(&a, &r_hat)))
    }
}

/// r^cpd from the two squared reconstruction errors.
pub fn reward_from_errors(err_r2h: f64, err_cycle: f64) -> f64 {
    libm::exp(-err_r2h - err_cycle)
}

/// Correspondence reward in (0, 1]: exponentiated negative sum of the R2H
/// and cycle reconstruction errors, mapper parameters frozen.
pub fn correspondence_reward(mapper: &MapperPair, p_h: &[f64], p_r: &[f64]) -> Result<f64, CorrespondError> {
    let (e1, e2) = mapper.reconstruction_errors(p_h, p_r)?;
    Ok(reward_from_errors(e1, e2))
}

/// Ablation variant: cycle term omitted.
pub fn r2h_only_reward(mapper: &MapperPair, p_h: &[f64], p_r: &[f64]) -> Result<f64, CorrespondError> {
    let (e1, _) = mapper.reconstruction_errors(p_h, p_r)?;
    Ok(libm::exp(-e1))
}

/// Mean losses over a batch: l_r2h, the cycle term, and their weighted sum
/// (unit weights by default, so l_total = l_r2h + l_cycle).
pub fn cycle_loss(mapper: &MapperPair, batch: &MapperBatch, cfg: &MapperConfig) -> Result<CycleLoss, CorrespondError> {
    if batch.is_empty() {
        return Err(CorrespondError::EmptyBatch);
    }
    let mut sum_r2h = 0.0;
    let mut sum_cycle = 0.0;
    for (p_h, p_r) in batch.human.iter().zip(batch.robot.iter()) {
        let (e1, e2) = mapper.reconstruction_errors(p_h, p_r)?;
        sum_r2h += e1;
        sum_cycle += e2;
    }
    let n = batch.len() as f64;
    let l_r2h = sum_r2h / n;
    let l_cycle = sum_cycle / n;
    Ok(CycleLoss {
        l_r2h,
        l_cycle,
        l_total: cfg.loss_weight_r2h * l_r2h + cfg.loss_weight_cycle * l_cycle,
    })
}

/// Adam optimizer state for the mapper pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapperOptimizer {
    pub r2h: AdamState,
    pub h2r: AdamState,
}

impl MapperOptimizer {
    pub fn new(mapper: &MapperPair, cfg: &MapperConfig) -> Self {
        let params = AdamParams::with_lr(cfg.learning_rate);
        MapperOptimizer {
            r2h: AdamState::for_net(&mapper.r2h_net, params),
            h2r: AdamState::for_net(&mapper.h2r_net, params),
        }
    }
}

/// Joint minibatch-gradient training of both mappers on the cycle
/// objective. Gradients flow into h2r through the composition and into r2h
/// via both terms. Returns the full-batch loss after each epoch.
pub fn update_mappers(
    mapper: &mut MapperPair,
    batch: &MapperBatch,
    cfg: &MapperConfig,
    opt: &mut MapperOptimizer,
    rng: &mut Rng,
) -> Result<Vec<CycleLoss>, CorrespondError> {
    if batch.is_empty() {
        return Err(CorrespondError::EmptyBatch);
    }
    // standardize once; stats are frozen for the whole update
    let robot_std: Vec<Vec<f64>> = batch.robot.iter().map(|p| mapper.robot_stat.standardize(p)).collect();
    let human_std: Vec<Vec<f64>> = batch.human.iter().map(|p| mapper.human_stat.standardize(p)).collect();

    let mut indices: Vec<usize> = (0..batch.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(cfg.minibatch.max(1)) {
            let mut grads_r2h = NetGrads::zeros_like(&mapper.r2h_net);
            let mut grads_h2r = NetGrads::zeros_like(&mapper.h2r_net);
            let inv_n = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let a = &robot_std[i];
                let h = &human_std[i];
                let r2h_trace = mapper.r2h_net.forward_trace(a).expect("shape checked");
                let h_hat = r2h_trace.output().to_vec();
                let h2r_trace = mapper.h2r_net.forward_trace(&h_hat).expect("shape checked");
                let r_hat = h2r_trace.output();
                // d/d r_hat of w2 * ||r_hat - a||^2
                let up_h2r: Vec<f64> = r_hat
                    .iter()
                    .zip(a.iter())
                    .map(|(rh, av)| 2.0 * cfg.loss_weight_cycle * (rh - av) * inv_n)
                    .collect();
                let grad_into_h_hat = mapper
                    .h2r_net
                    .backward_from_trace(&h2r_trace, &up_h2r, &mut grads_h2r)
                    .expect("shape checked");
                // d/d h_hat of w1 * ||h_hat - h||^2, plus the cycle path
                let up_r2h: Vec<f64> = h_hat
                    .iter()
                    .zip(h.iter())
                    .zip(grad_into_h_hat.iter())
                    .map(|((hh, hv), g)| 2.0 * cfg.loss_weight_r2h * (hh - hv) * inv_n + g)
                    .collect();
                mapper
                    .r2h_net
                    .backward_from_trace(&r2h_trace, &up_r2h, &mut grads_r2h)
                    .expect("shape checked");
            }
            if !grads_r2h.is_finite() || !grads_h2r.is_finite() {
                return Err(CorrespondError::NonFiniteLoss);
            }
            opt.r2h.step_net(&mut mapper.r2h_net, &grads_r2h);
            opt.h2r.step_net(&mut mapper.h2r_net, &grads_h2r);
        }
        let loss = cycle_loss(mapper, batch, cfg)?;
        if !loss.l_total.is_finite() {
            return Err(CorrespondError::NonFiniteLoss);
        }
        trace.push(loss);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand::SeedableRng;
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> Rng {
        Rng::seed_from_u64(seed)
    }

    fn zero_net(sizes: &[usize]) -> DenseNet {
        let mut net = DenseNet::init(sizes, Activation::Relu, 1.0, &mut rng(0));
        for w in net.weights.iter_mut() {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        net
    }

    /// Single linear layer implementing y = W^T x (given row-major W).
    fn linear_net(fan_in: usize, fan_out: usize, w: Vec<f64>) -> DenseNet {
        DenseNet {
            layer_sizes: alloc::vec![fan_in, fan_out],
            weights: alloc::vec![w],
            biases: alloc::vec![alloc::vec![0.0; fan_out]],
            hidden_activation: Activation::Relu,
        }
    }

    #[test]
    fn zero_weight_mappers_output_biases() {
        let mut mapper = MapperPair::new(&[16], &mut rng(1));
        mapper.r2h_net = zero_net(&[10, 16, 8]);
        mapper.r2h_net.biases[1] = alloc::vec![0.5; 8];
        let out = mapper.r2h_predict(&[1.0; 10]).unwrap();
        assert_eq!(out, alloc::vec![0.5; 8]);
    }

    #[test]
    fn predictions_deterministic_and_cycle_dim() {
        let mapper = MapperPair::new(&[16], &mut rng(2));
        let p_r = [0.4; 10];
        let a = mapper.r2h_predict(&p_r).unwrap();
        let b = mapper.r2h_predict(&p_r).unwrap();
        assert_eq!(a, b);
        let cycled = mapper.h2r_predict(&a).unwrap();
        assert_eq!(cycled.len(), ROBOT_POSE_DIM);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mapper = MapperPair::new(&[16], &mut rng(2));
        assert!(mapper.r2h_predict(&[0.0; 8]).is_err());
        assert!(mapper.h2r_predict(&[0.0; 10]).is_err());
    }

    /// r2h doubles the first 8 robot coordinates; h2r halves them back.
    fn exact_linear_pair() -> MapperPair {
        let mut w_r2h = alloc::vec![0.0; 10 * 8];
        for i in 0..8 {
            w_r2h[i * 8 + i] = 2.0;
        }
        let mut w_h2r = alloc::vec![0.0; 8 * 10];
        for i in 0..8 {
            w_h2r[i * 10 + i] = 0.5;
        }
        let mut mapper = MapperPair::new(&[4], &mut rng(0));
        mapper.r2h_net = linear_net(10, 8, w_r2h);
        mapper.h2r_net = linear_net(8, 10, w_h2r);
        mapper
    }

    fn linear_toy_batch(rng: &mut Rng, n: usize) -> MapperBatch {
        // p^h = 2 * p^r (first 8 coords), robot poses live in those 8 dims
        let mut batch = MapperBatch::default();
        for _ in 0..n {
            let mut p_r = alloc::vec![0.0; 10];
            for v in p_r.iter_mut().take(8) {
                *v = rng.random::<f64>().abs() + 0.1; // positive, relu-safe
            }
            let p_h: Vec<f64> = p_r.iter().take(8).map(|v| 2.0 * v).collect();
            batch.push(p_h, p_r);
        }
        batch
    }

    #[test]
    fn exact_inverse_maps_have_zero_loss() {
        let mapper = exact_linear_pair();
        let batch = linear_toy_batch(&mut rng(5), 32);
        let loss = cycle_loss(&mapper, &batch, &MapperConfig::default()).unwrap();
        assert!(loss.l_r2h < 1e-24, "{:?}", loss);
        assert!(loss.l_cycle < 1e-24, "{:?}", loss);
        assert_eq!(loss.l_total, loss.l_r2h + loss.l_cycle);
    }

    #[test]
    fn empty_batch_rejected() {
        let mapper = MapperPair::new(&[8], &mut rng(0));
        assert_eq!(
            cycle_loss(&mapper, &MapperBatch::default(), &MapperConfig::default()).unwrap_err(),
            CorrespondError::EmptyBatch
        );
    }

    #[test]
    fn batch_loss_matches_per_sample_recomputation() {
        let mapper = MapperPair::new(&[12], &mut rng(8));
        let mut r = rng(9);
        let mut batch = MapperBatch::default();
        for _ in 0..40 {
            let p_r: Vec<f64> = (0..10).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let p_h: Vec<f64> = (0..8).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            batch.push(p_h, p_r);
        }
        let loss = cycle_loss(&mapper, &batch, &MapperConfig::default()).unwrap();
        // brute-force re-computation, summed by hand
        let mut sum1 = 0.0;
        let mut sum2 = 0.0;
        for i in 0..batch.len() {
            let h_hat = mapper.r2h_net.forward(&batch.robot[i]).unwrap();
            let r_hat = mapper.h2r_net.forward(&h_hat).unwrap();
            sum1 += squared_distance(&batch.human[i], &h_hat);
            sum2 += squared_distance(&batch.robot[i], &r_hat);
        }
        let n = batch.len() as f64;
        assert!((loss.l_r2h - sum1 / n).abs() < 1e-10);
        assert!((loss.l_cycle - sum2 / n).abs() < 1e-10);
    }

    #[test]
    fn reward_formula_spot_values() {
        assert_eq!(reward_from_errors(0.0, 0.0), 1.0);
        let r = reward_from_errors(0.5, 0.25);
        assert!((r - libm::exp(-0.75)).abs() < 1e-12);
        assert!((r - 0.472_36).abs() < 1e-4);
    }

    #[test]
    fn reward_bounds_and_monotonicity() {
        let mut r = rng(12);
        for _ in 0..10_000 {
            let e1: f64 = r.random::<f64>() * 10.0;
            let e2: f64 = r.random::<f64>() * 10.0;
            let v = reward_from_errors(e1, e2);
            assert!(v > 0.0 && v <= 1.0);
            assert!(reward_from_errors(e1 + 0.1, e2) < v);
            assert!(reward_from_errors(e1, e2 + 0.1) < v);
        }
        assert_eq!(reward_from_errors(0.0, 0.0), 1.0);
    }

    #[test]
    fn r2h_only_dominates_full_reward() {
        let mapper = MapperPair::new(&[12], &mut rng(20));
        let mut r = rng(21);
        for _ in 0..200 {
            let p_r: Vec<f64> = (0..10).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let p_h: Vec<f64> = (0..8).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let full = correspondence_reward(&mapper, &p_h, &p_r).unwrap();
            let partial = r2h_only_reward(&mapper, &p_h, &p_r).unwrap();
            assert!(partial >= full);
        }
    }

    #[test]
    fn r2h_only_equals_full_when_cycle_error_zero() {
        let mapper = exact_linear_pair();
        let batch = linear_toy_batch(&mut rng(6), 4);
        for i in 0..batch.len() {
            let full = correspondence_reward(&mapper, &batch.human[i], &batch.robot[i]).unwrap();
            let partial = r2h_only_reward(&mapper, &batch.human[i], &batch.robot[i]).unwrap();
            assert!((full - partial).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_mappers_barely_move_under_update() {
        let mut mapper = exact_linear_pair();
        let before = mapper.clone();
        let batch = linear_toy_batch(&mut rng(7), 64);
        let cfg = MapperConfig {
            epochs: 2,
            minibatch: 32,
            ..MapperConfig::default()
        };
        let mut opt = MapperOptimizer::new(&mapper, &cfg);
        let trace = update_mappers(&mut mapper, &batch, &cfg, &mut opt, &mut rng(8)).unwrap();
        for loss in &trace {
            assert!(loss.l_total < 1e-12);
        }
        let mut update_norm_sq = 0.0;
        for (a, b) in mapper.r2h_net.weights[0].iter().zip(before.r2h_net.weights[0].iter()) {
            update_norm_sq += (a - b) * (a - b);
        }
        assert!(libm::sqrt(update_norm_sq) < 1e-6);
    }

    /// Synthetic dataset with exact linear correspondence on an 8-dim latent
    /// plus small observation noise, so both the r2h floor and the cycle
    /// reconstruction are achievable.
    pub(crate) fn synthetic_linear_dataset(
        n: usize,
        noise: f64,
        rng: &mut Rng,
    ) -> (MapperBatch, Vec<Vec<f64>>) {
        // fixed well-conditioned maps: p^r = B u, p^h = A p^r + b + eps
        let mut b_map = alloc::vec![alloc::vec![0.0; 8]; 10];
        for (i, row) in b_map.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i % 8 == j { 1.0 } else { 0.0 };
                *v += 0.1 * libm::sin((i * 8 + j) as f64);
            }
        }
        let mut a_map = alloc::vec![alloc::vec![0.0; 10]; 8];
        for (i, row) in a_map.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if j == i { 0.8 } else { 0.0 };
                *v += 0.05 * libm::cos((i * 10 + j) as f64);
            }
        }
        let offset: Vec<f64> = (0..8).map(|i| 0.1 * i as f64).collect();
        let mut batch = MapperBatch::default();
        for _ in 0..n {
            let u: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let p_r: Vec<f64> = b_map
                .iter()
                .map(|row| row.iter().zip(u.iter()).map(|(w, x)| w * x).sum())
                .collect();
            let p_h: Vec<f64> = a_map
                .iter()
                .zip(offset.iter())
                .map(|(row, b0)| {
                    let clean: f64 = row.iter().zip(p_r.iter()).map(|(w, x)| w * x).sum();
                    let eps: f64 = rng.sample(StandardNormal);
                    clean + b0 + noise * eps
                })
                .collect();
            batch.push(p_h, p_r);
        }
        (batch, a_map)
    }

    /// Ordinary least squares residual (mean squared error over the batch)
    /// of predicting p^h from [p^r, 1], solved by normal equations.
    pub(crate) fn least_squares_floor(batch: &MapperBatch) -> f64 {
        let n = batch.len();
        let d = ROBOT_POSE_DIM + 1;
        // X^T X and X^T Y
        let mut xtx = alloc::vec![alloc::vec![0.0f64; d]; d];
        let mut xty = alloc::vec![alloc::vec![0.0f64; HUMAN_POSE_DIM]; d];
        for i in 0..n {
            let mut x = batch.robot[i].clone();
            x.push(1.0);
            for a in 0..d {
                for b in 0..d {
                    xtx[a][b] += x[a] * x[b];
                }
                for k in 0..HUMAN_POSE_DIM {
                    xty[a][k] += x[a] * batch.human[i][k];
                }
            }
        }
        // Gaussian elimination with partial pivoting on [xtx | xty]
        for col in 0..d {
            let mut pivot = col;
            for row in col + 1..d {
                if xtx[row][col].abs() > xtx[pivot][col].abs() {
                    pivot = row;
                }
            }
            xtx.swap(col, pivot);
            xty.swap(col, pivot);
            let diag = xtx[col][col];
            for row in 0..d {
                if row == col {
                    continue;
                }
                let factor = xtx[row][col] / diag;
                for k in col..d {
                    let v = xtx[col][k];
                    xtx[row][k] -= factor * v;
                }
                for k in 0..HUMAN_POSE_DIM {
                    let v = xty[col][k];
                    xty[row][k] -= factor * v;
                }
            }
        }
        let coef: Vec<Vec<f64>> = (0..d).map(|a| {
            (0..HUMAN_POSE_DIM).map(|k| xty[a][k] / xtx[a][a]).collect()
        }).collect();
        let mut sse = 0.0;
        for i in 0..n {
            let mut x = batch.robot[i].clone();
            x.push(1.0);
            for k in 0..HUMAN_POSE_DIM {
                let pred: f64 = (0..d).map(|a| x[a] * coef[a][k]).sum();
                let e = batch.human[i][k] - pred;
                sse += e * e;
            }
        }
        sse / n as f64
    }

    #[test]
    fn training_reaches_least_squares_floor() {
        let mut r = rng(31);
        let (batch, _) = synthetic_linear_dataset(2000, 0.05, &mut r);
        let mut mapper = MapperPair::new(&[64, 64], &mut rng(32));
        // condition the nets the way the trainer does: stats fitted to the data
        for p in &batch.robot {
            mapper.robot_stat.update(p);
        }
        for p in &batch.human {
            mapper.human_stat.update(p);
        }
        let cfg = MapperConfig {
            epochs: 200,
            ..MapperConfig::default()
        };
        // the loss lives in standardized pose space, so the least-squares
        // oracle and variance must be computed there as well
        let mut std_batch = MapperBatch::default();
        for (h, p) in batch.human.iter().zip(batch.robot.iter()) {
            std_batch.push(mapper.human_stat.standardize(h), mapper.robot_stat.standardize(p));
        }
        let floor = least_squares_floor(&std_batch);
        let mut opt = MapperOptimizer::new(&mapper, &cfg);
        let trace = update_mappers(&mut mapper, &batch, &cfg, &mut opt, &mut rng(33)).unwrap();
        let final_loss = trace.last().unwrap();
        // variance of standardized p^h over the batch
        let n = batch.len() as f64;
        let mut mean = alloc::vec![0.0; HUMAN_POSE_DIM];
        for h in &std_batch.human {
            for (m, v) in mean.iter_mut().zip(h.iter()) {
                *m += v / n;
            }
        }
        let mut var = 0.0;
        for h in &std_batch.human {
            for (m, v) in mean.iter().zip(h.iter()) {
                var += (v - m) * (v - m) / n;
            }
        }
        assert!(
            final_loss.l_r2h < 0.01 * var,
            "l_r2h {} vs 0.01*var {}",
            final_loss.l_r2h,
            0.01 * var
        );
        assert!(
            final_loss.l_r2h < 2.0 * floor,
            "l_r2h {} vs 2x floor {}",
            final_loss.l_r2h,
            2.0 * floor
        );
        assert!(final_loss.l_cycle < 0.05, "l_cycle {}", final_loss.l_cycle);
        // loss trace non-increasing in at least 80% of consecutive epoch pairs
        let mut non_increasing = 0;
        for w in trace.windows(2) {
            if w[1].l_total <= w[0].l_total {
                non_increasing += 1;
            }
        }
        assert!(
            non_increasing * 10 >= (trace.len() - 1) * 8,
            "{non_increasing}/{} non-increasing",
            trace.len() - 1
        );
    }
}
