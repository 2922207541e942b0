//! Run directories and the training loop: config snapshot, per-iteration
//! CSV log, event log, periodic and final checkpoints, resumption.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crossloco_core::sim::RobotModel;
use crossloco_core::trainer::{train_iteration_with, IterationStats, RunState, TrainConfig};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::formats::load_dataset;
use crate::parallel::parallel_collect;
use crate::{content_hash, UsageError};

pub const LOG_NAME: &str = "log.csv";
pub const EVENTS_NAME: &str = "events.log";
pub const CONFIG_NAME: &str = "config.json";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

pub const LOG_HEADER: &str = "iteration,mean_r_total,mean_r_cpd,mean_r_root,mapper_l_r2h,mapper_l_cycle,mapper_l_total,clip_fraction,approx_kl,fall_rate";

pub fn log_row(s: &IterationStats) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        s.iteration,
        s.collect.mean_r_total,
        s.collect.mean_r_cpd,
        s.collect.mean_r_root,
        s.mapper_l_r2h,
        s.mapper_l_cycle,
        s.mapper_l_total,
        s.ppo.clip_fraction,
        s.ppo.approx_kl,
        s.collect.fall_rate
    )
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

pub fn parse_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: TrainConfig = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
    let errs = cfg.validation_errors();
    if !errs.is_empty() {
        bail!(UsageError(format!(
            "config {} failed validation:\n  {}",
            path.display(),
            errs.join("\n  ")
        )));
    }
    Ok(cfg)
}

/// Run training to `cfg.iterations`, starting fresh or from a checkpoint.
/// Returns the run directory.
pub fn train(cfg: &TrainConfig, resume: Option<&Path>) -> Result<PathBuf> {
    let errs = cfg.validation_errors();
    if !errs.is_empty() {
        bail!(UsageError(format!("invalid config:\n  {}", errs.join("\n  "))));
    }
    if cfg.out_dir.is_empty() {
        bail!(UsageError("out_dir: path must be set".into()));
    }
    let dataset = load_dataset(Path::new(&cfg.dataset))?;
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(dir.join("checkpoints"))
        .with_context(|| format!("creating run directory {}", dir.display()))?;

    let mut state = match resume {
        Some(ckpt) => {
            let (state, saved_cfg) = load_checkpoint(ckpt)?;
            if saved_cfg.ppo != cfg.ppo || saved_cfg.mode != cfg.mode {
                bail!(UsageError(
                    "resume checkpoint was trained with a different ppo config or mode".into()
                ));
            }
            state
        }
        None => RunState::init(cfg),
    };

    // snapshot the exact config; its hash ties log lines to the snapshot
    let config_json = serde_json::to_string_pretty(cfg)?;
    fs::write(dir.join(CONFIG_NAME), &config_json)?;
    append_line(
        &dir.join(EVENTS_NAME),
        &format!("start iteration={} config_hash={:016x}", state.iteration, content_hash(config_json.as_bytes())),
    )?;

    let log_path = dir.join(LOG_NAME);
    if resume.is_none() || !log_path.exists() {
        let mut f = File::create(&log_path)?;
        writeln!(f, "{LOG_HEADER}")?;
    }

    let model = RobotModel::default();
    while state.iteration < cfg.iterations {
        let stats = train_iteration_with(&mut state, &model, &dataset, cfg, parallel_collect)?;
        append_line(&log_path, &log_row(&stats))?;
        if stats.collect.divergences > 0 {
            append_line(
                &dir.join(EVENTS_NAME),
                &format!("iteration={} simulator_divergences={}", stats.iteration, stats.collect.divergences),
            )?;
        }
        if stats.ppo.skipped_minibatches > 0 {
            append_line(
                &dir.join(EVENTS_NAME),
                &format!("iteration={} skipped_minibatches={}", stats.iteration, stats.ppo.skipped_minibatches),
            )?;
        }
        if state.iteration % cfg.checkpoint_every == 0 && state.iteration < cfg.iterations {
            let path = dir.join("checkpoints").join(format!("iter_{}.ckpt", state.iteration));
            save_checkpoint(&state, cfg, &path)?;
        }
    }
    save_checkpoint(&state, cfg, &dir.join(FINAL_CHECKPOINT))?;
    append_line(&dir.join(EVENTS_NAME), &format!("done iteration={}", state.iteration))?;
    Ok(dir)
}
