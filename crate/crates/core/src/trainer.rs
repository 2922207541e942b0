//! Training orchestration: seeded rollout collection across environments,
//! the per-iteration update sequence (PPO, then mappers, then statistics),
//! and the fully serializable run state that makes checkpoints exact.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng as _;
use serde::{Deserialize, Serialize};

use crate::correspond::{
    correspondence_reward, r2h_only_reward, update_mappers, CorrespondError, CycleLoss, MapperBatch,
    MapperConfig, MapperOptimizer, MapperPair,
};
use crate::motion::{human_feature, normalize_root_trajectory, sample_clip, MotionDataset};
use crate::reward::{
    limit_penalty_from_flags, root_reward, torque_norm_penalty, torque_penalty, total_reward,
    RewardComponents, RewardMode, RewardWeights, ROOT_TRACK_SCALE,
};
use crate::rl::{
    compute_gae, policy_act, ppo_update, PPOConfig, PPOOptimizer, PPOStats, PolicyNet, RlError,
    RolloutBuffer, ValueNet, ACTION_DIM, POLICY_OBS_DIM,
};
use crate::sim::{
    check_termination, extract_obs, extract_pose, reset, step, ResetMode, RobotModel, SimError,
    Termination, NUM_JOINTS,
};
use crate::stats::RunningMeanVar;
use crate::Rng;

/// Checkpoint format version; bumped on any RunState layout change.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    Rl(RlError),
    Correspond(CorrespondError),
    Sim(SimError),
    InvalidConfig(Vec<String>),
    EmptyDataset,
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::Rl(e) => write!(f, "rl: {e}"),
            TrainError::Correspond(e) => write!(f, "correspondence: {e}"),
            TrainError::Sim(e) => write!(f, "simulation: {e}"),
            TrainError::InvalidConfig(errs) => write!(f, "invalid config: {}", errs.join("; ")),
            TrainError::EmptyDataset => write!(f, "dataset has no clips"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<RlError> for TrainError {
    fn from(e: RlError) -> Self {
        TrainError::Rl(e)
    }
}

impl From<CorrespondError> for TrainError {
    fn from(e: CorrespondError) -> Self {
        TrainError::Correspond(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Dataset directory; consumed by the loader, opaque to the core loop.
    pub dataset: String,
    /// Run output directory; likewise owned by the caller.
    pub out_dir: String,
    pub mode: RewardMode,
    pub weights: RewardWeights,
    pub ppo: PPOConfig,
    pub mapper: MapperConfig,
    pub iterations: u64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub initial_log_std: f64,
    /// Source-to-robot root trajectory scale.
    pub root_scale: f64,
    /// Penalize applied torques instead of the action norm.
    pub torque_norm_penalty: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: String::new(),
            out_dir: String::new(),
            mode: RewardMode::Full,
            weights: RewardWeights::default(),
            ppo: PPOConfig::default(),
            mapper: MapperConfig::default(),
            iterations: 200,
            seed: 0,
            checkpoint_every: 50,
            policy_hidden: vec![128, 128],
            value_hidden: vec![128, 128],
            initial_log_std: -0.5,
            root_scale: ROOT_TRACK_SCALE,
            torque_norm_penalty: false,
        }
    }
}

impl TrainConfig {
    /// All validation failures at once, named by field.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.dataset.is_empty() {
            errs.push(String::from("dataset: path must be set"));
        }
        if self.iterations == 0 {
            errs.push(String::from("iterations: must be positive"));
        }
        if !(0.0..1.0).contains(&self.ppo.gamma) {
            errs.push(String::from("ppo.gamma: must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.ppo.lambda) {
            errs.push(String::from("ppo.lambda: must be in [0, 1)"));
        }
        if self.ppo.clip_ratio <= 0.0 {
            errs.push(String::from("ppo.clip_ratio: must be positive"));
        }
        if self.ppo.num_envs == 0 || self.ppo.horizon == 0 {
            errs.push(String::from("ppo.num_envs/horizon: must be positive"));
        }
        if self.ppo.epochs == 0 || self.ppo.minibatches == 0 {
            errs.push(String::from("ppo.epochs/minibatches: must be positive"));
        }
        if self.policy_hidden.is_empty() || self.value_hidden.is_empty() {
            errs.push(String::from("policy_hidden/value_hidden: need at least one layer"));
        }
        if self.checkpoint_every == 0 {
            errs.push(String::from("checkpoint_every: must be positive"));
        }
        if self.root_scale <= 0.0 {
            errs.push(String::from("root_scale: must be positive"));
        }
        errs
    }
}

/// Everything a checkpoint must capture: networks, optimizer moments,
/// running statistics, the iteration counter, and the update-phase rng.
/// Restoring this state and rerunning an iteration is bit-exact.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunState {
    pub version: u32,
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub mapper: MapperPair,
    pub ppo_opt: PPOOptimizer,
    pub mapper_opt: MapperOptimizer,
    pub obs_stat: RunningMeanVar,
    pub iteration: u64,
    pub rng: Rng,
}

impl RunState {
    pub fn init(cfg: &TrainConfig) -> Self {
        let mut rng = Rng::seed_from_u64(cfg.seed);
        let policy = PolicyNet::init(
            POLICY_OBS_DIM,
            ACTION_DIM,
            &cfg.policy_hidden,
            cfg.initial_log_std,
            &mut rng,
        );
        let value = ValueNet::init(POLICY_OBS_DIM, &cfg.value_hidden, &mut rng);
        let mapper = MapperPair::new(&cfg.mapper.hidden, &mut rng);
        let ppo_opt = PPOOptimizer::new(&policy, &value, &cfg.ppo);
        let mapper_opt = MapperOptimizer::new(&mapper, &cfg.mapper);
        RunState {
            version: CHECKPOINT_VERSION,
            policy,
            value,
            mapper,
            ppo_opt,
            mapper_opt,
            obs_stat: RunningMeanVar::new(POLICY_OBS_DIM),
            iteration: 0,
            rng,
        }
    }
}

/// Rollout of one environment for one collection phase, with advantages and
/// returns already computed over its horizon.
#[derive(Clone, Debug)]
pub struct EnvRollout {
    pub env_index: usize,
    pub buffer: RolloutBuffer,
    /// Unstandardized observations, kept for the post-update statistics pass.
    pub raw_obs: Vec<Vec<f64>>,
    pub episodes_finished: u64,
    pub falls: u64,
    pub divergences: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectStats {
    pub mean_r_total: f64,
    pub mean_r_cpd: f64,
    pub mean_r_root: f64,
    pub episodes_finished: u64,
    pub falls: u64,
    pub divergences: u64,
    /// Falls per finished episode (0 when none finished).
    pub fall_rate: f64,
}

/// Deterministic per-environment stream: mixes seed, iteration, and
/// environment index so no stream depends on scheduling.
fn env_rng(seed: u64, iteration: u64, env_index: usize) -> Rng {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [iteration, env_index as u64] {
        h ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    Rng::seed_from_u64(h)
}

struct Episode {
    clip_index: usize,
    start_frame: usize,
    step: usize,
    root_track: Vec<(f64, f64)>,
}

/// Roll one environment for the full horizon, resetting on falls and clip
/// exhaustion. The policy, mappers, and observation statistics are all
/// frozen for the duration. Time-limit boundaries fold the bootstrap value
/// into the advantage-estimation reward; falls terminate with none.
pub fn collect_env(
    state: &RunState,
    model: &RobotModel,
    dataset: &MotionDataset,
    cfg: &TrainConfig,
    env_index: usize,
) -> Result<EnvRollout, TrainError> {
    if dataset.clips.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut rng = env_rng(cfg.seed, state.iteration, env_index);
    let mut buffer = RolloutBuffer::new();
    let mut raw_obs_log = Vec::with_capacity(cfg.ppo.horizon);
    let mut gae_rewards = Vec::with_capacity(cfg.ppo.horizon);
    let mut episodes_finished = 0u64;
    let mut falls = 0u64;
    let mut divergences = 0u64;
    let mut episode_ordinal = 0u64;

    let begin_episode = |rng: &mut Rng| {
        let clip_index = sample_clip(dataset, rng);
        let clip = &dataset.clips[clip_index];
        let (sim, start_frame) = reset(model, clip, ResetMode::RandomFrame, cfg.root_scale, rng);
        let episode = Episode {
            clip_index,
            start_frame,
            step: 0,
            root_track: normalize_root_trajectory(clip, cfg.root_scale),
        };
        (sim, episode)
    };

    let (mut sim, mut episode) = begin_episode(&mut rng);

    for _t in 0..cfg.ppo.horizon {
        let clip = &dataset.clips[episode.clip_index];
        let frame = episode.start_frame + episode.step;
        let feature = human_feature(clip, frame).expect("frame within clip");
        let mut raw = extract_obs(&sim);
        raw.extend_from_slice(&feature);
        let obs = state.obs_stat.standardize(&raw);
        let act = policy_act(&state.policy, &state.value, &obs, &mut rng, false)?;

        let mut action = [0.0; NUM_JOINTS];
        action.copy_from_slice(&act.action);
        let stepped = step(model, &sim, &action);
        let (next_sim, info, diverged) = match stepped {
            Ok((s, i)) => (s, i, false),
            Err(SimError::Diverged) => (sim, Default::default(), true),
        };

        // reward evaluated on the outcome state against the next clip frame
        let next_frame = (frame + 1).min(clip.len() - 1);
        let p_r = extract_pose(&next_sim).to_vec();
        let p_h = clip.frames[next_frame].pose.to_vec();
        let r_cpd = correspondence_reward(&state.mapper, &p_h, &p_r)?;
        let r_cpd_r2h = r2h_only_reward(&state.mapper, &p_h, &p_r)?;
        let (track_x, track_v) = episode.root_track[next_frame];
        let r_root = root_reward([next_sim.root_pos[0], next_sim.root_vel[0]], [track_x, track_v]);
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

        let fell = diverged || check_termination(model, &next_sim) == Termination::Fell;
        let clip_done = !fell && frame + 1 >= clip.len() - 1;

        buffer.obs.push(obs);
        buffer.actions.push(act.action);
        buffer.log_probs.push(act.log_prob);
        buffer.values.push(act.value);
        buffer.rewards.push(breakdown);
        buffer.dones.push(fell || clip_done);
        buffer.human_pose.push(p_h);
        buffer.robot_pose.push(p_r);
        buffer
            .episode_id
            .push(((env_index as u64) << 32) | episode_ordinal);
        raw_obs_log.push(raw);

        let mut gae_r = breakdown.r_total;
        if clip_done {
            // time limit, not a failure: bootstrap through the boundary
            let next_feature = human_feature(clip, next_frame).expect("frame within clip");
            let mut next_raw = extract_obs(&next_sim);
            next_raw.extend_from_slice(&next_feature);
            let next_obs = state.obs_stat.standardize(&next_raw);
            let v = state
                .value
                .net
                .forward(&next_obs)
                .map_err(|_| RlError::NonFiniteOutput)?[0];
            gae_r += cfg.ppo.gamma * v;
        }
        gae_rewards.push(gae_r);

        if fell || clip_done {
            if diverged {
                divergences += 1;
            }
            if fell {
                falls += 1;
            }
            episodes_finished += 1;
            episode_ordinal += 1;
            let (s, e) = begin_episode(&mut rng);
            sim = s;
            episode = e;
        } else {
            sim = next_sim;
            episode.step += 1;
        }
    }

    // bootstrap for a horizon cut mid-episode
    let bootstrap = if *buffer.dones.last().unwrap() {
        0.0
    } else {
        let clip = &dataset.clips[episode.clip_index];
        let frame = episode.start_frame + episode.step;
        let feature = human_feature(clip, frame).expect("frame within clip");
        let mut raw = extract_obs(&sim);
        raw.extend_from_slice(&feature);
        let obs = state.obs_stat.standardize(&raw);
        state
            .value
            .net
            .forward(&obs)
            .map_err(|_| RlError::NonFiniteOutput)?[0]
    };
    let (advantages, returns) = compute_gae(
        &gae_rewards,
        &buffer.values,
        bootstrap,
        &buffer.dones,
        cfg.ppo.gamma,
        cfg.ppo.lambda,
    );
    buffer.advantages = advantages;
    buffer.returns = returns;

    Ok(EnvRollout {
        env_index,
        buffer,
        raw_obs: raw_obs_log,
        episodes_finished,
        falls,
        divergences,
    })
}

/// Concatenate per-environment rollouts in environment-index order, so the
/// result is independent of how collection was scheduled.
pub fn assemble_rollouts(mut envs: Vec<EnvRollout>) -> (RolloutBuffer, Vec<Vec<f64>>, CollectStats) {
    envs.sort_by_key(|e| e.env_index);
    let mut buffer = RolloutBuffer::new();
    let mut raw_obs = Vec::new();
    let mut stats = CollectStats::default();
    for env in envs {
        let b = env.buffer;
        for r in &b.rewards {
            stats.mean_r_total += r.r_total;
            stats.mean_r_cpd += r.r_cpd;
            stats.mean_r_root += r.r_root;
        }
        buffer.obs.extend(b.obs);
        buffer.actions.extend(b.actions);
        buffer.log_probs.extend(b.log_probs);
        buffer.values.extend(b.values);
        buffer.rewards.extend(b.rewards);
        buffer.dones.extend(b.dones);
        buffer.human_pose.extend(b.human_pose);
        buffer.robot_pose.extend(b.robot_pose);
        buffer.episode_id.extend(b.episode_id);
        buffer.advantages.extend(b.advantages);
        buffer.returns.extend(b.returns);
        raw_obs.extend(env.raw_obs);
        stats.episodes_finished += env.episodes_finished;
        stats.falls += env.falls;
        stats.divergences += env.divergences;
    }
    let n = buffer.len().max(1) as f64;
    stats.mean_r_total /= n;
    stats.mean_r_cpd /= n;
    stats.mean_r_root /= n;
    if stats.episodes_finished > 0 {
        stats.fall_rate = stats.falls as f64 / stats.episodes_finished as f64;
    }
    (buffer, raw_obs, stats)
}

/// Sequential collection over all environments.
pub fn collect_rollouts(
    state: &RunState,
    model: &RobotModel,
    dataset: &MotionDataset,
    cfg: &TrainConfig,
) -> Result<(RolloutBuffer, Vec<Vec<f64>>, CollectStats), TrainError> {
    let mut envs = Vec::with_capacity(cfg.ppo.num_envs);
    for e in 0..cfg.ppo.num_envs {
        envs.push(collect_env(state, model, dataset, cfg, e)?);
    }
    Ok(assemble_rollouts(envs))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    /// Counter value after this iteration.
    pub iteration: u64,
    pub collect: CollectStats,
    pub ppo: PPOStats,
    pub mapper_l_r2h: f64,
    pub mapper_l_cycle: f64,
    pub mapper_l_total: f64,
}

/// One full iteration: collect with everything frozen, PPO update, mapper
/// update on the same buffer, then fold the collected raw observations and
/// poses into the running statistics and drop the buffer.
pub fn train_iteration(
    state: &mut RunState,
    model: &RobotModel,
    dataset: &MotionDataset,
    cfg: &TrainConfig,
) -> Result<IterationStats, TrainError> {
    train_iteration_with(state, model, dataset, cfg, collect_rollouts)
}

/// As `train_iteration`, with a pluggable collection strategy so callers
/// can fan environments out to worker threads.
pub fn train_iteration_with<F>(
    state: &mut RunState,
    model: &RobotModel,
    dataset: &MotionDataset,
    cfg: &TrainConfig,
    collect: F,
) -> Result<IterationStats, TrainError>
where
    F: FnOnce(
        &RunState,
        &RobotModel,
        &MotionDataset,
        &TrainConfig,
    ) -> Result<(RolloutBuffer, Vec<Vec<f64>>, CollectStats), TrainError>,
{
    let (mut buffer, raw_obs, collect_stats) = collect(state, model, dataset, cfg)?;

    let ppo_stats = ppo_update(
        &mut state.policy,
        &mut state.value,
        &mut state.ppo_opt,
        &mut buffer,
        &cfg.ppo,
        &mut state.rng,
    )?;

    // mappers are co-trained in every mode so the correspondence metric
    // stays comparable across ablations
    let mut batch = MapperBatch::default();
    for (h, r) in buffer.human_pose.iter().zip(buffer.robot_pose.iter()) {
        batch.push(h.clone(), r.clone());
    }
    let losses = update_mappers(&mut state.mapper, &batch, &cfg.mapper, &mut state.mapper_opt, &mut state.rng)?;
    let last = losses.last().copied().unwrap_or(CycleLoss {
        l_r2h: 0.0,
        l_cycle: 0.0,
        l_total: 0.0,
    });

    for raw in &raw_obs {
        state.obs_stat.update(raw);
    }
    for (h, r) in batch.human.iter().zip(batch.robot.iter()) {
        state.mapper.human_stat.update(h);
        state.mapper.robot_stat.update(r);
    }
    buffer.clear();
    drop(buffer);

    state.iteration += 1;
    Ok(IterationStats {
        iteration: state.iteration,
        collect: collect_stats,
        ppo: ppo_stats,
        mapper_l_r2h: last.l_r2h,
        mapper_l_cycle: last.l_cycle,
        mapper_l_total: last.l_total,
    })
}
