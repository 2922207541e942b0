//! Versioned JSON checkpoints holding the full run state plus the config
//! that produced it, so evaluation and resumption need no other inputs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crossloco_core::trainer::{RunState, TrainConfig, CHECKPOINT_VERSION};

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: TrainConfig,
    state: RunState,
}

pub fn save_checkpoint(state: &RunState, config: &TrainConfig, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        state: state.clone(),
    };
    let json = serde_json::to_string(&file)?;
    fs::write(path, json).with_context(|| format!("writing checkpoint {}", path.display()))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(RunState, TrainConfig)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing checkpoint {}", path.display()))?;
    if file.version != CHECKPOINT_VERSION {
        bail!(
            "checkpoint {} was written with format version {}, this build reads version {}",
            path.display(),
            file.version,
            CHECKPOINT_VERSION
        );
    }
    Ok((file.state, file.config))
}
