//! Threaded rollout collection. Environments are split round-robin across
//! workers and reassembled in environment-index order, so the buffer is
//! identical to a sequential collection no matter the thread count.

use std::thread;

use crossloco_core::motion::MotionDataset;
use crossloco_core::rl::RolloutBuffer;
use crossloco_core::sim::RobotModel;
use crossloco_core::trainer::{
    assemble_rollouts, collect_env, CollectStats, EnvRollout, RunState, TrainConfig, TrainError,
};

/// CROSSLOCO_THREADS if set, else the number of logical cores.
pub fn worker_count() -> usize {
    if let Ok(v) = std::env::var("CROSSLOCO_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                return n;
            }
        }
    }
    thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn parallel_collect(
    state: &RunState,
    model: &RobotModel,
    dataset: &MotionDataset,
    cfg: &TrainConfig,
) -> Result<(RolloutBuffer, Vec<Vec<f64>>, CollectStats), TrainError> {
    let workers = worker_count().min(cfg.ppo.num_envs).max(1);
    let mut envs: Vec<EnvRollout> = Vec::with_capacity(cfg.ppo.num_envs);
    let results: Vec<Result<Vec<EnvRollout>, TrainError>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut e = w;
                    while e < cfg.ppo.num_envs {
                        out.push(collect_env(state, model, dataset, cfg, e)?);
                        e += workers;
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for r in results {
        envs.extend(r?);
    }
    Ok(assemble_rollouts(envs))
}
