//! Clip and dataset files. Clips are JSON with one row of 9 numbers per
//! frame; velocities are recomputed on load rather than stored.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crossloco_core::motion::{
    finite_difference_velocities, Frame, HumanPose, MotionClip, MotionDataset,
};

pub const CLIP_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

pub const JOINT_NAMES: [&str; 6] = [
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_hip",
    "right_knee",
    "right_ankle",
];

/// Frame layout: [root_x, root_height, root_pitch, joints 0..6].
#[derive(Serialize, Deserialize)]
struct ClipFile {
    version: u32,
    name: String,
    frame_dt: f64,
    joint_names: Vec<String>,
    frames: Vec<Vec<f64>>,
}

pub fn save_clip(clip: &MotionClip, path: &Path) -> Result<()> {
    let file = ClipFile {
        version: CLIP_FORMAT_VERSION,
        name: clip.name.clone(),
        frame_dt: clip.frame_dt,
        joint_names: JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
        frames: clip
            .frames
            .iter()
            .map(|f| {
                let mut row = vec![f.root_x, f.pose.root_height, f.pose.root_pitch];
                row.extend_from_slice(&f.pose.joint_angles);
                row
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&file)?;
    fs::write(path, json).with_context(|| format!("writing clip {}", path.display()))?;
    Ok(())
}

pub fn load_clip(path: &Path) -> Result<MotionClip> {
    let text = fs::read_to_string(path).with_context(|| format!("reading clip {}", path.display()))?;
    let file: ClipFile =
        serde_json::from_str(&text).with_context(|| format!("parsing clip {}", path.display()))?;
    if file.version != CLIP_FORMAT_VERSION {
        bail!(
            "clip {} has format version {}, this build reads version {}",
            path.display(),
            file.version,
            CLIP_FORMAT_VERSION
        );
    }
    if !(file.frame_dt > 0.0) {
        bail!("clip {}: frame_dt must be positive", path.display());
    }
    let mut frames = Vec::with_capacity(file.frames.len());
    for (i, row) in file.frames.iter().enumerate() {
        if row.len() != 9 {
            bail!("clip {}: frame {i} has {} values, expected 9", path.display(), row.len());
        }
        if !row.iter().all(|v| v.is_finite()) {
            bail!("clip {}: frame {i} contains non-finite values", path.display());
        }
        let pose = HumanPose::from_slice(&row[1..9]).expect("8 values");
        frames.push(Frame { pose, root_x: row[0] });
    }
    if frames.len() < 2 {
        bail!("clip {}: needs at least 2 frames", path.display());
    }
    let clip = finite_difference_velocities(MotionClip {
        name: file.name,
        frame_dt: file.frame_dt,
        frames,
        velocities: Vec::new(),
    })
    .map_err(|e| anyhow::anyhow!("clip {}: {e:?}", path.display()))?;
    Ok(clip)
}

#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub clips: Vec<String>,
}

/// Write clips plus a manifest listing them, in order.
pub fn save_dataset(dir: &Path, clips: &[MotionClip], seed: u64) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(clips.len());
    for clip in clips {
        let file = format!("{}.json", clip.name);
        save_clip(clip, &dir.join(&file))?;
        names.push(file);
    }
    let manifest = Manifest {
        version: MANIFEST_FORMAT_VERSION,
        seed,
        clips: names,
    };
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading manifest {}", path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.version != MANIFEST_FORMAT_VERSION {
        bail!(
            "manifest {} has version {}, this build reads version {}",
            path.display(),
            manifest.version,
            MANIFEST_FORMAT_VERSION
        );
    }
    Ok(manifest)
}

/// Load every clip named by the manifest, uniform sampling weights.
pub fn load_dataset(dir: &Path) -> Result<MotionDataset> {
    let manifest = load_manifest(dir)?;
    if manifest.clips.is_empty() {
        bail!("manifest in {} lists no clips", dir.display());
    }
    let mut clips = Vec::with_capacity(manifest.clips.len());
    for name in &manifest.clips {
        clips.push(load_clip(&dir.join(name))?);
    }
    Ok(MotionDataset::uniform(clips))
}

/// Fingerprint of the manifest file, for cross-run consistency checks.
pub fn manifest_hash(dir: &Path) -> Result<u64> {
    let bytes = fs::read(dir.join(MANIFEST_NAME))?;
    Ok(crate::content_hash(&bytes))
}
