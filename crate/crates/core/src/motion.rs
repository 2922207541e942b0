//! Source ("human") motion data model: a planar biped pose, procedurally
//! generated clips, finite-difference velocities, the future-frame feature
//! used to condition the policy, and the scaled root track consumed by the
//! root-tracking reward.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::Rng;

pub const HUMAN_POSE_DIM: usize = 8;
pub const HUMAN_FEATURE_DIM: usize = 68;
/// Future frame offsets baked into the conditioning feature.
pub const LOOKAHEAD_FRAMES: [usize; 4] = [1, 2, 10, 30];
pub const CLIP_FPS: f64 = 30.0;
/// Nominal standing root height of the source biped, meters.
pub const STAND_HEIGHT: f64 = 0.9;
/// All generated joint angles stay inside this box, radians.
pub const HUMAN_JOINT_BOX: f64 = 2.5;

#[derive(Clone, Debug, PartialEq)]
pub enum MotionError {
    InvalidConfig(String),
    TooShort { frames: usize },
    FrameOutOfRange { t: usize, len: usize },
}

impl core::fmt::Display for MotionError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MotionError::InvalidConfig(msg) => write!(f, "invalid clip config: {msg}"),
            MotionError::TooShort { frames } => {
                write!(f, "clip needs at least 2 frames, got {frames}")
            }
            MotionError::FrameOutOfRange { t, len } => {
                write!(f, "frame index {t} out of range for clip of length {len}")
            }
        }
    }
}

impl core::error::Error for MotionError {}

/// Local pose of the planar source biped. Joint order is fixed:
/// hip, knee, ankle for the left leg, then the same for the right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanPose {
    pub root_height: f64,
    pub root_pitch: f64,
    pub joint_angles: [f64; 6],
}

impl HumanPose {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(HUMAN_POSE_DIM);
        v.push(self.root_height);
        v.push(self.root_pitch);
        v.extend_from_slice(&self.joint_angles);
        v
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        if v.len() != HUMAN_POSE_DIM {
            return None;
        }
        let mut joint_angles = [0.0; 6];
        joint_angles.copy_from_slice(&v[2..8]);
        Some(HumanPose {
            root_height: v[0],
            root_pitch: v[1],
            joint_angles,
        })
    }
}

/// One clip frame: local pose plus the global root x used for root tracking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub pose: HumanPose,
    pub root_x: f64,
}

/// Forward-difference velocities for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameVelocity {
    /// (x-dot, z-dot) of the root, m/s.
    pub root_vel: [f64; 2],
    pub pitch_rate: f64,
    pub joint_rates: [f64; 6],
}

impl FrameVelocity {
    pub const ZERO: FrameVelocity = FrameVelocity {
        root_vel: [0.0, 0.0],
        pitch_rate: 0.0,
        joint_rates: [0.0; 6],
    };
}

#[derive(Clone, Debug)]
pub struct MotionClip {
    pub name: String,
    pub frame_dt: f64,
    pub frames: Vec<Frame>,
    pub velocities: Vec<FrameVelocity>,
}

impl MotionClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 * self.frame_dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Walk,
    Run,
    Hop,
    Sway,
    Stand,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "walk" => Some(Preset::Walk),
            "run" => Some(Preset::Run),
            "hop" => Some(Preset::Hop),
            "sway" => Some(Preset::Sway),
            "stand" => Some(Preset::Stand),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Walk => "walk",
            Preset::Run => "run",
            Preset::Hop => "hop",
            Preset::Sway => "sway",
            Preset::Stand => "stand",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClipParams {
    /// Forward root speed, m/s. Ignored (treated as 0) by stand and sway.
    pub speed: f64,
    /// Gait frequency, Hz.
    pub frequency: f64,
    /// Hip swing amplitude, rad.
    pub amplitude: f64,
    /// Clip duration, seconds.
    pub duration: f64,
}

impl Default for ClipParams {
    fn default() -> Self {
        ClipParams {
            speed: 1.0,
            frequency: 1.2,
            amplitude: 0.5,
            duration: 8.0,
        }
    }
}

/// Kinematically smooth planar gait generator standing in for captured
/// source motion. Sinusoidal hip/knee/ankle phases, antiphase legs (in
/// phase for hop), root advancing at the commanded speed, root height
/// oscillating about the standing height.
pub fn generate_clip(preset: Preset, params: &ClipParams, seed: u64) -> Result<MotionClip, MotionError> {
    if !(params.duration >= 1.0) {
        return Err(MotionError::InvalidConfig(format!(
            "duration must be >= 1 s, got {}",
            params.duration
        )));
    }
    if !(params.frequency > 0.0 && params.frequency <= 5.0) {
        return Err(MotionError::InvalidConfig(format!(
            "frequency must be in (0, 5] Hz, got {}",
            params.frequency
        )));
    }
    if !(params.amplitude >= 0.0 && params.amplitude <= 1.2) {
        return Err(MotionError::InvalidConfig(format!(
            "amplitude must be in [0, 1.2] rad, got {}",
            params.amplitude
        )));
    }
    if !(params.speed >= 0.0 && params.speed <= 4.0) {
        return Err(MotionError::InvalidConfig(format!(
            "speed must be in [0, 4] m/s, got {}",
            params.speed
        )));
    }

    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    // per-clip style variation so repeated presets are not identical
    let phase0: f64 = rng.random::<f64>() * core::f64::consts::TAU;
    let amp_jitter: f64 = 0.9 + 0.2 * rng.random::<f64>();

    let dt = 1.0 / CLIP_FPS;
    let n_frames = libm::round(params.duration * CLIP_FPS) as usize + 1;
    let omega = core::f64::consts::TAU * params.frequency;
    let amp = params.amplitude * amp_jitter;

    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let t = i as f64 * dt;
        let phi = omega * t + phase0;
        let (root_x, pose) = match preset {
            Preset::Stand => (
                0.0,
                HumanPose {
                    root_height: STAND_HEIGHT,
                    root_pitch: 0.0,
                    joint_angles: [0.1, 0.2, -0.05, 0.1, 0.2, -0.05],
                },
            ),
            Preset::Sway => {
                // in-place weight shifting: slow antiphase hip/knee motion,
                // gentle height and pitch bob
                let s = libm::sin(phi);
                let c = libm::cos(phi);
                (
                    0.0,
                    HumanPose {
                        root_height: STAND_HEIGHT - 0.05 + 0.05 * c,
                        root_pitch: 0.08 * s,
                        joint_angles: [
                            0.1 + amp * 0.5 * s,
                            0.3 - 0.3 * c,
                            -0.05 - 0.1 * s,
                            0.1 - amp * 0.5 * s,
                            0.3 + 0.3 * c,
                            -0.05 + 0.1 * s,
                        ],
                    },
                )
            }
            Preset::Hop => {
                // both legs in phase; pronounced height oscillation
                let s = libm::sin(phi);
                let crouch = 0.5 * (1.0 - libm::cos(phi));
                (
                    params.speed * t,
                    HumanPose {
                        root_height: STAND_HEIGHT - 0.12 + 0.12 * s,
                        root_pitch: 0.05 * s,
                        joint_angles: [
                            -0.2 - amp * 0.6 * crouch,
                            0.4 + 0.8 * crouch,
                            -0.2 - 0.3 * crouch,
                            -0.2 - amp * 0.6 * crouch,
                            0.4 + 0.8 * crouch,
                            -0.2 - 0.3 * crouch,
                        ],
                    },
                )
            }
            Preset::Walk | Preset::Run => {
                // antiphase legs; knees flex on the swing half of the cycle
                let lift = if preset == Preset::Run { 0.9 } else { 0.5 };
                let s_l = libm::sin(phi);
                let s_r = libm::sin(phi + core::f64::consts::PI);
                let knee_l = 0.5 * (1.0 + libm::sin(phi - core::f64::consts::FRAC_PI_2));
                let knee_r = 0.5 * (1.0 + libm::sin(phi + core::f64::consts::FRAC_PI_2));
                let bob = if preset == Preset::Run { 0.06 } else { 0.03 };
                (
                    params.speed * t,
                    HumanPose {
                        root_height: STAND_HEIGHT + bob * libm::sin(2.0 * phi),
                        root_pitch: 0.04 * libm::sin(2.0 * phi),
                        joint_angles: [
                            amp * s_l,
                            0.15 + lift * knee_l,
                            -0.1 - 0.2 * amp * s_l,
                            amp * s_r,
                            0.15 + lift * knee_r,
                            -0.1 - 0.2 * amp * s_r,
                        ],
                    },
                )
            }
        };
        frames.push(Frame { pose, root_x });
    }

    let name = format!("{}_{seed}", preset.name());
    finite_difference_velocities(MotionClip {
        name,
        frame_dt: dt,
        frames,
        velocities: Vec::new(),
    })
}

/// Forward differences; the last frame copies the previous one's rates.
pub fn finite_difference_velocities(mut clip: MotionClip) -> Result<MotionClip, MotionError> {
    let n = clip.frames.len();
    if n < 2 {
        return Err(MotionError::TooShort { frames: n });
    }
    let inv_dt = 1.0 / clip.frame_dt;
    let mut velocities = Vec::with_capacity(n);
    for t in 0..n - 1 {
        let a = &clip.frames[t];
        let b = &clip.frames[t + 1];
        let mut joint_rates = [0.0; 6];
        for j in 0..6 {
            joint_rates[j] = (b.pose.joint_angles[j] - a.pose.joint_angles[j]) * inv_dt;
        }
        velocities.push(FrameVelocity {
            root_vel: [
                (b.root_x - a.root_x) * inv_dt,
                (b.pose.root_height - a.pose.root_height) * inv_dt,
            ],
            pitch_rate: (b.pose.root_pitch - a.pose.root_pitch) * inv_dt,
            joint_rates,
        });
    }
    velocities.push(velocities[n - 2]);
    clip.velocities = velocities;
    Ok(clip)
}

/// Conditioning feature at frame `t`: pose + root velocity + joint rates at
/// the future offsets, out-of-range lookaheads clamped to the final frame.
pub fn human_feature(clip: &MotionClip, t: usize) -> Result<Vec<f64>, MotionError> {
    let len = clip.len();
    if t >= len {
        return Err(MotionError::FrameOutOfRange { t, len });
    }
    let mut feat = Vec::with_capacity(HUMAN_FEATURE_DIM);
    for k in LOOKAHEAD_FRAMES {
        let idx = (t + k).min(len - 1);
        let frame = &clip.frames[idx];
        let vel = &clip.velocities[idx];
        feat.extend_from_slice(&frame.pose.to_vec());
        feat.push(vel.root_vel[0]);
        feat.push(vel.root_vel[1]);
        feat.push(vel.pitch_rate);
        feat.extend_from_slice(&vel.joint_rates);
    }
    debug_assert_eq!(feat.len(), HUMAN_FEATURE_DIM);
    Ok(feat)
}

/// Per-frame desired root track (x, x-dot): start-anchored root x scaled by
/// `rho`, plus the scaled root x-velocity.
pub fn normalize_root_trajectory(clip: &MotionClip, rho: f64) -> Vec<(f64, f64)> {
    let x0 = clip.frames[0].root_x;
    clip.frames
        .iter()
        .zip(clip.velocities.iter())
        .map(|(f, v)| (rho * (f.root_x - x0), rho * v.root_vel[0]))
        .collect()
}

#[derive(Clone, Debug)]
pub struct MotionDataset {
    pub clips: Vec<MotionClip>,
    /// Per-clip sampling weights; always normalized to sum to 1.
    pub weights: Vec<f64>,
}

impl MotionDataset {
    pub fn uniform(clips: Vec<MotionClip>) -> Self {
        assert!(!clips.is_empty(), "dataset must be non-empty");
        let w = 1.0 / clips.len() as f64;
        let weights = clips.iter().map(|_| w).collect();
        MotionDataset { clips, weights }
    }

    pub fn weighted(clips: Vec<MotionClip>, weights: Vec<f64>) -> Result<Self, MotionError> {
        if clips.is_empty() {
            return Err(MotionError::InvalidConfig("dataset must be non-empty".into()));
        }
        if clips.len() != weights.len() {
            return Err(MotionError::InvalidConfig(format!(
                "{} clips but {} weights",
                clips.len(),
                weights.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(MotionError::InvalidConfig("weights must be non-negative with positive sum".into()));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(MotionDataset { clips, weights })
    }
}

/// Draw a clip index by the dataset weights.
pub fn sample_clip(dataset: &MotionDataset, rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in dataset.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    dataset.weights.len() - 1
}

/// The default 12-clip corpus: walk x3 speeds, run x2, hop x2, sway x3,
/// stand x2, all 8 s long.
pub fn default_clip_specs() -> Vec<(Preset, ClipParams)> {
    let base = ClipParams::default();
    let mut specs = Vec::new();
    for speed in [0.6, 0.9, 1.2] {
        specs.push((Preset::Walk, ClipParams { speed, ..base }));
    }
    for speed in [1.6, 2.0] {
        specs.push((
            Preset::Run,
            ClipParams {
                speed,
                frequency: 2.0,
                amplitude: 0.7,
                ..base
            },
        ));
    }
    for speed in [0.4, 0.7] {
        specs.push((
            Preset::Hop,
            ClipParams {
                speed,
                frequency: 1.5,
                amplitude: 0.6,
                ..base
            },
        ));
    }
    for frequency in [0.5, 0.8, 1.1] {
        specs.push((
            Preset::Sway,
            ClipParams {
                speed: 0.0,
                frequency,
                amplitude: 0.6,
                ..base
            },
        ));
    }
    for _ in 0..2 {
        specs.push((Preset::Stand, ClipParams { speed: 0.0, ..base }));
    }
    specs
}

pub fn default_dataset(seed: u64) -> MotionDataset {
    let clips = default_clip_specs()
        .into_iter()
        .enumerate()
        .map(|(i, (preset, params))| {
            generate_clip(preset, &params, seed.wrapping_add(i as u64)).expect("default specs are valid")
        })
        .collect();
    MotionDataset::uniform(clips)
}
