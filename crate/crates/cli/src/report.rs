//! Evaluation reports, retargeting exports, and the ablation sweep.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crossloco_core::metrics::{evaluate, ReportRow};
use crossloco_core::motion::MotionDataset;
use crossloco_core::reward::RewardMode;
use crossloco_core::sim::{RobotModel, NUM_JOINTS, ROBOT_POSE_DIM};
use crossloco_core::trainer::TrainConfig;
use crossloco_core::motion::HUMAN_POSE_DIM;

use crate::checkpoint::load_checkpoint;
use crate::formats::{load_clip, load_dataset, manifest_hash};
use crate::run::{train, FINAL_CHECKPOINT};
use crate::UsageError;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_HEADER: &str = "mode,checkpoint,acr,div,rtr,fall_rate,seed";

pub fn write_report(rows: &[ReportRow], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(REPORT_CSV);
    let mut csv = File::create(&csv_path)?;
    writeln!(csv, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.mode.name(),
            r.checkpoint,
            r.acr,
            r.div,
            r.rtr,
            r.fall_rate,
            r.seed
        )?;
    }
    let txt_path = dir.join(REPORT_TXT);
    let mut txt = File::create(&txt_path)?;
    writeln!(
        txt,
        "{:<10} {:<28} {:>8} {:>8} {:>8} {:>10}",
        "mode", "checkpoint", "ACR", "DIV", "RTR", "fall_rate"
    )?;
    for r in rows {
        writeln!(
            txt,
            "{:<10} {:<28} {:>8.4} {:>8.4} {:>8.4} {:>10.4}",
            r.mode.name(),
            r.checkpoint,
            r.acr,
            r.div,
            r.rtr,
            r.fall_rate
        )?;
    }
    Ok((csv_path, txt_path))
}

/// Metrics for one checkpoint against a dataset directory.
pub fn eval_checkpoint(
    checkpoint: &Path,
    dataset_dir: &Path,
    subset_size: usize,
    metric_seed: u64,
    out_dir: &Path,
) -> Result<ReportRow> {
    let (state, cfg) = load_checkpoint(checkpoint)?;
    let dataset = load_dataset(dataset_dir)?;
    let model = RobotModel::default();
    let name = checkpoint
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| checkpoint.display().to_string());
    let (row, _) = evaluate(&state, &model, &dataset, &cfg, &name, subset_size, metric_seed)
        .map_err(|e| anyhow::anyhow!("evaluation failed: {e}"))?;
    write_report(std::slice::from_ref(&row), out_dir)?;
    Ok(row)
}

fn csv_header() -> String {
    let mut cols = vec![
        "step".into(),
        "root_x".into(),
        "root_z".into(),
        "root_pitch".into(),
        "root_vx".into(),
        "root_vz".into(),
        "pitch_rate".into(),
    ];
    for j in 0..NUM_JOINTS {
        cols.push(format!("q{j}"));
    }
    for c in ["r_cpd", "r_root", "r_tor", "r_lim", "r_total"] {
        cols.push(c.into());
    }
    for j in 0..HUMAN_POSE_DIM {
        cols.push(format!("r2h_{j}"));
    }
    for j in 0..ROBOT_POSE_DIM {
        cols.push(format!("cycle_{j}"));
    }
    cols.join(",")
}

/// Roll a single clip through the checkpointed policy deterministically and
/// export the trajectory: state, reward breakdown, and the mapper's
/// reconstructed poses at each step.
pub fn retarget(checkpoint: &Path, clip_path: &Path, out_csv: &Path) -> Result<()> {
    let (state, cfg) = load_checkpoint(checkpoint)?;
    let clip = load_clip(clip_path)?;
    let dataset = MotionDataset::uniform(vec![clip]);
    let model = RobotModel::default();
    let rollouts = crossloco_core::metrics::run_eval_rollouts(&state, &model, &dataset, &cfg)
        .map_err(|e| anyhow::anyhow!("rollout failed: {e}"))?;
    let rollout = &rollouts[0];

    let mut f = File::create(out_csv)
        .with_context(|| format!("creating {}", out_csv.display()))?;
    writeln!(f, "{}", csv_header())?;
    for (i, s) in rollout.states.iter().enumerate() {
        let p_r = &rollout.robot_pose[i];
        let reconstructed = state
            .mapper
            .r2h_predict(p_r)
            .map_err(|e| anyhow::anyhow!("mapper: {e}"))?;
        let cycled = state
            .mapper
            .h2r_predict(&reconstructed)
            .map_err(|e| anyhow::anyhow!("mapper: {e}"))?;
        let r = &rollout.rewards[i];
        let mut row = vec![
            i.to_string(),
            s.root_pos[0].to_string(),
            s.root_pos[1].to_string(),
            s.root_pitch.to_string(),
            s.root_vel[0].to_string(),
            s.root_vel[1].to_string(),
            s.pitch_rate.to_string(),
        ];
        row.extend(s.joint_angles.iter().map(|v| v.to_string()));
        for v in [r.r_cpd, r.r_root, r.r_tor, r.r_lim, r.r_total] {
            row.push(v.to_string());
        }
        row.extend(reconstructed.iter().map(|v| v.to_string()));
        row.extend(cycled.iter().map(|v| v.to_string()));
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn parse_modes(spec: &str) -> Result<Vec<RewardMode>> {
    let mut modes = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        match RewardMode::parse(part) {
            Some(m) => modes.push(m),
            None => bail!(UsageError(format!(
                "unknown mode '{part}' (expected full, task_only, or r2h_only)"
            ))),
        }
    }
    if modes.is_empty() {
        bail!(UsageError("no modes requested".into()));
    }
    Ok(modes)
}

/// Train once per mode with shared seed and dataset, evaluate each final
/// checkpoint, and merge the rows into one comparison report under
/// `<out_dir>/ablation`.
pub fn ablate(base_cfg: &TrainConfig, modes: &[RewardMode], subset_size: usize, metric_seed: u64) -> Result<Vec<ReportRow>> {
    if base_cfg.out_dir.is_empty() {
        bail!(UsageError("out_dir: path must be set".into()));
    }
    let dataset_dir = PathBuf::from(&base_cfg.dataset);
    let expected_hash = manifest_hash(&dataset_dir)?;
    let base_dir = PathBuf::from(&base_cfg.out_dir);
    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        // every run reads the same manifest; a mid-sweep edit would silently
        // break comparability
        if manifest_hash(&dataset_dir)? != expected_hash {
            bail!("dataset manifest changed during the ablation sweep");
        }
        let mut cfg = base_cfg.clone();
        cfg.mode = mode;
        cfg.out_dir = base_dir.join(mode.name()).display().to_string();
        let run_dir = train(&cfg, None)?;
        let row = eval_checkpoint(
            &run_dir.join(FINAL_CHECKPOINT),
            &dataset_dir,
            subset_size,
            metric_seed,
            &run_dir,
        )?;
        rows.push(row);
    }
    write_report(&rows, &base_dir.join("ablation"))?;
    Ok(rows)
}
