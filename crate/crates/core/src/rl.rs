//! Clip-conditioned PPO: Gaussian policy and value networks over the
//! concatenated robot-state + motion-feature observation, generalized
//! advantage estimation, and the clipped-surrogate update.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::motion::HUMAN_FEATURE_DIM;
use crate::nn::{
    clip_grad_norm, gaussian_entropy, gaussian_log_prob, sample_gaussian, Activation, AdamParams,
    AdamState, DenseNet, GaussianHead, NetGrads,
};
use crate::reward::RewardBreakdown;
use crate::sim::{NUM_JOINTS, OBS_DIM};
use crate::Rng;

/// Policy and value input: robot observation followed by the motion feature.
pub const POLICY_OBS_DIM: usize = OBS_DIM + HUMAN_FEATURE_DIM;
pub const ACTION_DIM: usize = NUM_JOINTS;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RlError {
    /// A network produced a non-finite output for this observation.
    NonFiniteOutput,
    /// Buffer fields disagree in length or the buffer is empty.
    BadBuffer,
}

impl core::fmt::Display for RlError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RlError::NonFiniteOutput => write!(f, "non-finite network output"),
            RlError::BadBuffer => write!(f, "rollout buffer empty or inconsistent"),
        }
    }
}

impl core::error::Error for RlError {}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyNet {
    pub net: DenseNet,
    pub head: GaussianHead,
}

impl PolicyNet {
    /// Hidden layers use ELU; the output layer starts near zero so initial
    /// actions stay close to the nominal posture.
    pub fn init(
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        initial_log_std: f64,
        rng: &mut Rng,
    ) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        PolicyNet {
            net: DenseNet::init(&sizes, Activation::Elu, 0.01, rng),
            head: GaussianHead::new(action_dim, initial_log_std),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValueNet {
    pub net: DenseNet,
}

impl ValueNet {
    pub fn init(obs_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        ValueNet {
            net: DenseNet::init(&sizes, Activation::Elu, 1.0, rng),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PPOConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_ratio: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub num_envs: usize,
    pub horizon: usize,
}

impl Default for PPOConfig {
    fn default() -> Self {
        PPOConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip_ratio: 0.2,
            epochs: 4,
            minibatches: 4,
            learning_rate: 3e-4,
            value_coef: 0.5,
            entropy_coef: 0.005,
            max_grad_norm: 1.0,
            num_envs: 64,
            horizon: 64,
        }
    }
}

/// On-policy data for one collection phase. `obs` holds the observations
/// exactly as the policy consumed them (already standardized), so replaying
/// them during the update reproduces the collection-time action
/// distribution. Pose pairs are timestep-aligned for the mapper update.
#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<RewardBreakdown>,
    pub dones: Vec<bool>,
    pub human_pose: Vec<Vec<f64>>,
    pub robot_pose: Vec<Vec<f64>>,
    pub episode_id: Vec<u64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        RolloutBuffer::default()
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn clear(&mut self) {
        *self = RolloutBuffer::default();
    }

    fn check(&self) -> Result<(), RlError> {
        let n = self.obs.len();
        let ok = n > 0
            && self.actions.len() == n
            && self.log_probs.len() == n
            && self.values.len() == n
            && self.rewards.len() == n
            && self.dones.len() == n
            && self.human_pose.len() == n
            && self.robot_pose.len() == n
            && self.episode_id.len() == n
            && self.advantages.len() == n
            && self.returns.len() == n;
        if ok {
            Ok(())
        } else {
            Err(RlError::BadBuffer)
        }
    }
}

#[derive(Clone, Debug)]
pub struct ActOutput {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

/// One policy/value query. Deterministic mode returns the mean action with
/// its own log density.
pub fn policy_act(
    policy: &PolicyNet,
    value: &ValueNet,
    obs: &[f64],
    rng: &mut Rng,
    deterministic: bool,
) -> Result<ActOutput, RlError> {
    let mean = policy.net.forward(obs).map_err(|_| RlError::NonFiniteOutput)?;
    let v = value.net.forward(obs).map_err(|_| RlError::NonFiniteOutput)?[0];
    if !mean.iter().all(|m| m.is_finite()) || !v.is_finite() {
        return Err(RlError::NonFiniteOutput);
    }
    let action = if deterministic {
        mean.clone()
    } else {
        sample_gaussian(&mean, &policy.head.log_std, rng)
    };
    let log_prob = gaussian_log_prob(&mean, &policy.head.log_std, &action);
    Ok(ActOutput { action, log_prob, value: v })
}

/// Reverse-recursion generalized advantage estimation. `dones[t]` marks a
/// terminal transition at step t: nothing after t is bootstrapped into it.
/// The value after the last step is `bootstrap_value`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap_value: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let mask = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 == n { bootstrap_value } else { values[t + 1] };
        let delta = rewards[t] + gamma * mask * next_value - values[t];
        gae = delta + gamma * lambda * mask * gae;
        advantages[t] = gae;
    }
    let returns: Vec<f64> = advantages.iter().zip(values.iter()).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// In-place batch standardization to zero mean, unit-ish scale.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    // mean computed relative to the first element, so a constant batch has
    // exactly zero residuals and maps to all zeros
    let shift = adv[0];
    let mean: f64 = shift + adv.iter().map(|a| a - shift).sum::<f64>() / n;
    let var: f64 = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    for a in adv.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

/// Adam moments for the three updated parameter sets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PPOOptimizer {
    pub policy: AdamState,
    pub value: AdamState,
    pub log_std: AdamState,
}

impl PPOOptimizer {
    pub fn new(policy: &PolicyNet, value: &ValueNet, cfg: &PPOConfig) -> Self {
        let params = AdamParams::with_lr(cfg.learning_rate);
        PPOOptimizer {
            policy: AdamState::for_net(&policy.net, params),
            value: AdamState::for_net(&value.net, params),
            log_std: AdamState::new(&[policy.head.log_std.len()], params),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PPOStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub skipped_minibatches: usize,
}

fn fisher_yates(indices: &mut [usize], rng: &mut Rng) {
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

/// Clipped-surrogate PPO update over the buffer: `epochs` passes of
/// `minibatches` shuffled minibatches, maximizing
/// mean min(rho A, clip(rho) A) with value regression, an entropy bonus, and
/// global gradient-norm clipping. Advantages are normalized over the whole
/// buffer first. Reported loss statistics are averaged over all minibatches.
pub fn ppo_update(
    policy: &mut PolicyNet,
    value: &mut ValueNet,
    opt: &mut PPOOptimizer,
    buffer: &mut RolloutBuffer,
    cfg: &PPOConfig,
    rng: &mut Rng,
) -> Result<PPOStats, RlError> {
    buffer.check()?;
    let n = buffer.len();
    normalize_advantages(&mut buffer.advantages);

    let mut stats = PPOStats::default();
    let mut batches_done = 0usize;
    let mut indices: Vec<usize> = (0..n).collect();
    for _epoch in 0..cfg.epochs {
        fisher_yates(&mut indices, rng);
        let mb_count = cfg.minibatches.max(1);
        for mb in 0..mb_count {
            let lo = mb * n / mb_count;
            let hi = (mb + 1) * n / mb_count;
            if lo == hi {
                continue;
            }
            let batch = &indices[lo..hi];
            let m = batch.len() as f64;

            let mut pg = NetGrads::zeros_like(&policy.net);
            let mut vg = NetGrads::zeros_like(&value.net);
            let mut lsg = vec![0.0; policy.head.log_std.len()];
            let mut policy_loss = 0.0;
            let mut value_loss = 0.0;
            let mut clipped = 0usize;
            let mut kl = 0.0;

            for &i in batch {
                let obs = &buffer.obs[i];
                let action = &buffer.actions[i];
                let adv = buffer.advantages[i];

                let trace = policy.net.forward_trace(obs).map_err(|_| RlError::NonFiniteOutput)?;
                let mean = trace.output();
                let lp_new = gaussian_log_prob(mean, &policy.head.log_std, action);
                let ratio = libm::exp(lp_new - buffer.log_probs[i]);
                let clip_lo = 1.0 - cfg.clip_ratio;
                let clip_hi = 1.0 + cfg.clip_ratio;
                let surr1 = ratio * adv;
                let surr2 = ratio.clamp(clip_lo, clip_hi) * adv;
                policy_loss -= surr1.min(surr2) / m;
                if (ratio - 1.0).abs() > cfg.clip_ratio {
                    clipped += 1;
                }
                kl += (buffer.log_probs[i] - lp_new) / m;

                // d(-min)/d(log pi_new) is -rho*A on the unclipped branch, 0 otherwise
                let dl_dlp = if surr1 <= surr2 { -ratio * adv / m } else { 0.0 };
                if dl_dlp != 0.0 {
                    let mut up = vec![0.0; mean.len()];
                    for (k, u) in up.iter_mut().enumerate() {
                        let sigma = libm::exp(policy.head.log_std[k]);
                        let z = (action[k] - mean[k]) / sigma;
                        // d log p / d mean_k = z / sigma; d log p / d ls_k = z^2 - 1
                        *u = dl_dlp * z / sigma;
                        lsg[k] += dl_dlp * (z * z - 1.0);
                    }
                    policy
                        .net
                        .backward_from_trace(&trace, &up, &mut pg)
                        .map_err(|_| RlError::NonFiniteOutput)?;
                }

                let vtrace = value.net.forward_trace(obs).map_err(|_| RlError::NonFiniteOutput)?;
                let v = vtrace.output()[0];
                let err = v - buffer.returns[i];
                value_loss += cfg.value_coef * err * err / m;
                let vup = [2.0 * cfg.value_coef * err / m];
                value
                    .net
                    .backward_from_trace(&vtrace, &vup, &mut vg)
                    .map_err(|_| RlError::NonFiniteOutput)?;
            }

            // entropy bonus: maximize H, which depends only on log_std
            let entropy = gaussian_entropy(&policy.head.log_std);
            for g in lsg.iter_mut() {
                *g -= cfg.entropy_coef;
            }
            let loss = policy_loss + value_loss - cfg.entropy_coef * entropy;
            if !loss.is_finite() || !pg.is_finite() || !vg.is_finite() || !lsg.iter().all(|g| g.is_finite())
            {
                stats.skipped_minibatches += 1;
                continue;
            }

            clip_grad_norm(&mut [&mut pg, &mut vg], &mut lsg, cfg.max_grad_norm);
            opt.policy.step_net(&mut policy.net, &pg);
            opt.value.step_net(&mut value.net, &vg);
            let mut ls = core::mem::take(&mut policy.head.log_std);
            opt.log_std.step_vec(&mut ls, &lsg);
            policy.head.log_std = ls;
            policy.head.clamp();

            stats.policy_loss += policy_loss;
            stats.value_loss += value_loss;
            stats.entropy += entropy;
            stats.clip_fraction += clipped as f64 / m;
            stats.approx_kl += kl;
            batches_done += 1;
        }
    }
    if batches_done > 0 {
        let b = batches_done as f64;
        stats.policy_loss /= b;
        stats.value_loss /= b;
        stats.entropy /= b;
        stats.clip_fraction /= b;
        stats.approx_kl /= b;
    }
    Ok(stats)
}
