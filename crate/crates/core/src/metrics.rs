//! Evaluation metrics: averaged correspondence reward, feature-space motion
//! diversity over random subset pairs, and averaged root tracking reward,
//! computed from deterministic per-clip rollouts.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::correspond::{correspondence_reward, r2h_only_reward};
use crate::motion::{human_feature, normalize_root_trajectory};
use crate::reward::{
    limit_penalty_from_flags, root_reward, torque_norm_penalty, torque_penalty, total_reward,
    RewardBreakdown, RewardComponents, RewardMode,
};
use crate::rl::policy_act;
use crate::sim::{
    check_termination, extract_obs, extract_pose, reset, step, ResetMode, RobotDynState, RobotModel,
    SimError, Termination,
};
use crate::trainer::{RunState, TrainConfig, TrainError};
use crate::Rng;
use rand::SeedableRng as _;

/// Motion feature for diversity: root velocities and pitch rate plus the
/// full joint pose.
pub const FEATURE_DIM: usize = 11;

pub const DEFAULT_DIV_SUBSET: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricsError {
    EmptyRollouts,
    /// Feature pool smaller than the two requested subsets.
    PoolTooSmall { pool: usize, needed: usize },
}

impl core::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetricsError::EmptyRollouts => write!(f, "no rollout steps to average"),
            MetricsError::PoolTooSmall { pool, needed } => {
                write!(f, "feature pool of {pool} cannot supply {needed} samples")
            }
        }
    }
}

impl core::error::Error for MetricsError {}

pub fn feature_vector(state: &RobotDynState) -> [f64; FEATURE_DIM] {
    let mut f = [0.0; FEATURE_DIM];
    f[0] = state.root_vel[0];
    f[1] = state.root_vel[1];
    f[2] = state.pitch_rate;
    f[3..].copy_from_slice(&state.joint_angles);
    f
}

/// Deterministic-policy rollout of one clip.
#[derive(Clone, Debug)]
pub struct EvalRollout {
    pub clip_name: String,
    pub states: Vec<RobotDynState>,
    pub robot_pose: Vec<Vec<f64>>,
    pub human_pose: Vec<Vec<f64>>,
    /// Breakdown under the run's reward mode (what a log would contain).
    pub rewards: Vec<RewardBreakdown>,
    /// Full two-term correspondence reward, logged in every mode so the
    /// correspondence metric stays comparable across ablations.
    pub cpd_full: Vec<f64>,
    pub fell: bool,
}

/// One deterministic rollout per dataset clip, from the clip start, until
/// fall or clip end. Policy, mappers, and statistics are frozen.
pub fn run_eval_rollouts(
    state: &RunState,
    model: &RobotModel,
    dataset: &crate::motion::MotionDataset,
    cfg: &TrainConfig,
) -> Result<Vec<EvalRollout>, TrainError> {
    if dataset.clips.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut rollouts = Vec::with_capacity(dataset.clips.len());
    // deterministic actions never consult this stream
    let mut rng = Rng::seed_from_u64(0);
    for clip in &dataset.clips {
        let (mut sim, _) = reset(model, clip, ResetMode::ClipStart, cfg.root_scale, &mut rng);
        let root_track = normalize_root_trajectory(clip, cfg.root_scale);
        let mut out = EvalRollout {
            clip_name: clip.name.clone(),
            states: Vec::new(),
            robot_pose: Vec::new(),
            human_pose: Vec::new(),
            rewards: Vec::new(),
            cpd_full: Vec::new(),
            fell: false,
        };
        for frame in 0..clip.len().saturating_sub(1) {
            let feature = human_feature(clip, frame).expect("frame within clip");
            let mut raw = extract_obs(&sim);
            raw.extend_from_slice(&feature);
            let obs = state.obs_stat.standardize(&raw);
            let act = policy_act(&state.policy, &state.value, &obs, &mut rng, true)?;
            let mut action = [0.0; crate::sim::NUM_JOINTS];
            action.copy_from_slice(&act.action);
            let (next_sim, info) = match step(model, &sim, &action) {
                Ok(v) => v,
                Err(SimError::Diverged) => {
                    out.fell = true;
                    break;
                }
            };
            let next_frame = (frame + 1).min(clip.len() - 1);
            let p_r = extract_pose(&next_sim).to_vec();
            let p_h = clip.frames[next_frame].pose.to_vec();
            let r_cpd = correspondence_reward(&state.mapper, &p_h, &p_r)?;
            let r_cpd_r2h = r2h_only_reward(&state.mapper, &p_h, &p_r)?;
            let (tx, tv) = root_track[next_frame];
            let r_root = root_reward([next_sim.root_pos[0], next_sim.root_vel[0]], [tx, tv]);
            let r_tor = if cfg.torque_norm_penalty {
                torque_norm_penalty(model, &info.torques)
            } else {
                torque_penalty(&act.action)
            };
            let r_lim = limit_penalty_from_flags(&info.limit_violations);
            let breakdown = total_reward(
                &RewardComponents {
                    r_cpd,
                    r_cpd_r2h,
                    r_root,
                    r_tor,
                    r_lim,
                },
                &cfg.weights,
                cfg.mode,
            );
            out.states.push(next_sim);
            out.robot_pose.push(p_r);
            out.human_pose.push(p_h);
            out.rewards.push(breakdown);
            out.cpd_full.push(r_cpd);
            if check_termination(model, &next_sim) == Termination::Fell {
                out.fell = true;
                break;
            }
            sim = next_sim;
        }
        rollouts.push(out);
    }
    Ok(rollouts)
}

fn mean_over_steps<F: Fn(&EvalRollout, usize) -> f64>(
    rollouts: &[EvalRollout],
    f: F,
) -> Result<f64, MetricsError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in rollouts {
        for i in 0..r.rewards.len() {
            sum += f(r, i);
            n += 1;
        }
    }
    if n == 0 {
        Err(MetricsError::EmptyRollouts)
    } else {
        Ok(sum / n as f64)
    }
}

/// Averaged correspondence reward: mean of the full r_cpd over all steps.
pub fn acr(rollouts: &[EvalRollout]) -> Result<f64, MetricsError> {
    mean_over_steps(rollouts, |r, i| r.cpd_full[i])
}

/// Averaged root tracking reward.
pub fn rtr(rollouts: &[EvalRollout]) -> Result<f64, MetricsError> {
    mean_over_steps(rollouts, |r, i| r.rewards[i].r_root)
}

/// Mean distance between features paired by position.
pub fn paired_mean_distance(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let sum: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| {
            libm::sqrt(x.iter().zip(y.iter()).map(|(p, q)| (p - q) * (p - q)).sum())
        })
        .sum();
    sum / a.len() as f64
}

/// Diversity: draw two disjoint uniform subsets of `subset_size` features,
/// pair them in draw order, and average the pairwise distances.
pub fn div(pool: &[[f64; FEATURE_DIM]], subset_size: usize, rng: &mut Rng) -> Result<f64, MetricsError> {
    let needed = 2 * subset_size;
    if pool.len() < needed || subset_size == 0 {
        return Err(MetricsError::PoolTooSmall {
            pool: pool.len(),
            needed,
        });
    }
    // partial Fisher-Yates: the first 2*subset_size slots become a uniform
    // sample without replacement
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    for i in 0..needed {
        let j = rng.random_range(i..pool.len());
        indices.swap(i, j);
    }
    let a: Vec<&[f64]> = indices[..subset_size].iter().map(|&i| &pool[i][..]).collect();
    let b: Vec<&[f64]> = indices[subset_size..needed].iter().map(|&i| &pool[i][..]).collect();
    Ok(paired_mean_distance(&a, &b))
}

/// Pool the diversity features of a set of rollouts.
pub fn pool_features(rollouts: &[EvalRollout]) -> Vec<[f64; FEATURE_DIM]> {
    rollouts
        .iter()
        .flat_map(|r| r.states.iter().map(feature_vector))
        .collect()
}

/// One line of an evaluation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub mode: RewardMode,
    pub checkpoint: String,
    pub acr: f64,
    pub div: f64,
    pub rtr: f64,
    pub fall_rate: f64,
    pub seed: u64,
}

/// Metrics for one checkpoint: rollouts on every clip, then the three
/// scalar metrics plus the fall rate.
pub fn evaluate(
    state: &RunState,
    model: &RobotModel,
    dataset: &crate::motion::MotionDataset,
    cfg: &TrainConfig,
    checkpoint_name: &str,
    subset_size: usize,
    metric_seed: u64,
) -> Result<(ReportRow, Vec<EvalRollout>), TrainError> {
    let rollouts = run_eval_rollouts(state, model, dataset, cfg)?;
    let acr_v = acr(&rollouts).map_err(|_| TrainError::EmptyDataset)?;
    let rtr_v = rtr(&rollouts).map_err(|_| TrainError::EmptyDataset)?;
    let pool = pool_features(&rollouts);
    // shrink the subset for small pools rather than refusing to report
    let effective = subset_size.min(pool.len() / 2).max(1);
    let mut rng = Rng::seed_from_u64(metric_seed);
    let div_v = div(&pool, effective, &mut rng).map_err(|_| TrainError::EmptyDataset)?;
    let falls = rollouts.iter().filter(|r| r.fell).count();
    let row = ReportRow {
        mode: cfg.mode,
        checkpoint: String::from(checkpoint_name),
        acr: acr_v,
        div: div_v,
        rtr: rtr_v,
        fall_rate: falls as f64 / rollouts.len() as f64,
        seed: metric_seed,
    };
    Ok((row, rollouts))
}
