//! Deterministic planar quadruped dynamics: PD-actuated massless legs on a
//! rigid root, spring-damper ground contact with smoothed friction,
//! semi-implicit Euler integration at 240 Hz with control at 30 Hz.
//!
//! Legs are massless and joint dynamics are decoupled from the root, so the
//! root is driven only through the foot contact forces.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::motion::MotionClip;
use crate::Rng;

pub const ROBOT_POSE_DIM: usize = 10;
pub const OBS_DIM: usize = 29;
pub const NUM_LEGS: usize = 4;
pub const NUM_JOINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimError {
    /// Integrator produced a non-finite state; the episode must abort.
    Diverged,
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::Diverged => write!(f, "simulation diverged to a non-finite state"),
        }
    }
}

impl core::error::Error for SimError {}

/// Physical description of the planar quadruped. Joint order is leg-major,
/// front to rear, hip then knee: [h0, k0, h1, k1, h2, k2, h3, k3].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobotModel {
    pub root_mass: f64,
    pub root_inertia: f64,
    /// Hip x-offsets in the body frame, front to rear, meters.
    pub hip_offsets: [f64; NUM_LEGS],
    pub upper_len: f64,
    pub lower_len: f64,
    pub joint_inertia: f64,
    pub joint_damping: f64,
    pub kp: f64,
    pub kd: f64,
    pub torque_limit: f64,
    pub hip_limits: (f64, f64),
    pub knee_limits: (f64, f64),
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub friction: f64,
    /// Friction smoothing velocity for the tanh profile, m/s.
    pub friction_smoothing_vel: f64,
    pub gravity: f64,
    pub physics_dt: f64,
    pub control_decimation: u32,
    pub nominal_height: f64,
    pub nominal_joints: [f64; NUM_JOINTS],
    /// Target = nominal + action_scale * action.
    pub action_scale: f64,
    pub fall_height: f64,
    pub fall_pitch: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        RobotModel {
            root_mass: 10.0,
            root_inertia: 0.5,
            hip_offsets: [0.30, 0.10, -0.10, -0.30],
            upper_len: 0.25,
            lower_len: 0.25,
            joint_inertia: 0.05,
            joint_damping: 0.1,
            kp: 40.0,
            kd: 1.0,
            torque_limit: 30.0,
            hip_limits: (-1.2, 1.2),
            knee_limits: (0.1, 2.4),
            contact_stiffness: 5000.0,
            contact_damping: 100.0,
            friction: 0.8,
            friction_smoothing_vel: 0.1,
            gravity: 9.81,
            physics_dt: 1.0 / 240.0,
            control_decimation: 8,
            nominal_height: 0.42,
            nominal_joints: [0.3, 0.8, -0.3, 0.8, 0.3, 0.8, -0.3, 0.8],
            action_scale: 0.8,
            fall_height: 0.20,
            fall_pitch: 1.0,
        }
    }
}

impl RobotModel {
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.control_decimation as f64
    }

    pub fn joint_limits(&self, joint: usize) -> (f64, f64) {
        if joint % 2 == 0 {
            self.hip_limits
        } else {
            self.knee_limits
        }
    }
}

/// Local robot pose p^r: root height, root pitch, 8 joint angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotPose {
    pub root_height: f64,
    pub root_pitch: f64,
    pub joint_angles: [f64; NUM_JOINTS],
}

impl RobotPose {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(ROBOT_POSE_DIM);
        v.push(self.root_height);
        v.push(self.root_pitch);
        v.extend_from_slice(&self.joint_angles);
        v
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        if v.len() != ROBOT_POSE_DIM {
            return None;
        }
        let mut joint_angles = [0.0; NUM_JOINTS];
        joint_angles.copy_from_slice(&v[2..]);
        Some(RobotPose {
            root_height: v[0],
            root_pitch: v[1],
            joint_angles,
        })
    }
}

/// Full dynamic state of the robot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotDynState {
    pub root_pos: [f64; 2],
    pub root_pitch: f64,
    pub root_vel: [f64; 2],
    pub pitch_rate: f64,
    pub joint_angles: [f64; NUM_JOINTS],
    pub joint_rates: [f64; NUM_JOINTS],
    pub prev_action: [f64; NUM_JOINTS],
}

impl RobotDynState {
    pub fn is_finite(&self) -> bool {
        self.root_pos.iter().all(|v| v.is_finite())
            && self.root_pitch.is_finite()
            && self.root_vel.iter().all(|v| v.is_finite())
            && self.pitch_rate.is_finite()
            && self.joint_angles.iter().all(|v| v.is_finite())
            && self.joint_rates.iter().all(|v| v.is_finite())
            && self.prev_action.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    ClipStart,
    RandomFrame,
}

/// Put the robot at the nominal stance with the root x aligned to the
/// (scaled) clip frame. Returns the state and the chosen start frame.
pub fn reset(
    model: &RobotModel,
    clip: &MotionClip,
    mode: ResetMode,
    root_scale: f64,
    rng: &mut Rng,
) -> (RobotDynState, usize) {
    let start_frame = match mode {
        ResetMode::ClipStart => 0,
        ResetMode::RandomFrame => rng.random_range(0..clip.len().saturating_sub(1)),
    };
    let root_x = root_scale * (clip.frames[start_frame].root_x - clip.frames[0].root_x);
    let state = RobotDynState {
        root_pos: [root_x, model.nominal_height],
        root_pitch: 0.0,
        root_vel: [0.0, 0.0],
        pitch_rate: 0.0,
        joint_angles: model.nominal_joints,
        joint_rates: [0.0; NUM_JOINTS],
        prev_action: [0.0; NUM_JOINTS],
    };
    (state, start_frame)
}

fn clamp_action(a: &[f64; NUM_JOINTS]) -> [f64; NUM_JOINTS] {
    let mut out = *a;
    for v in out.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
    out
}

/// PD torques toward nominal + scaled action, saturated at the torque limit.
pub fn pd_torque(
    model: &RobotModel,
    q: &[f64; NUM_JOINTS],
    q_rate: &[f64; NUM_JOINTS],
    action: &[f64; NUM_JOINTS],
) -> [f64; NUM_JOINTS] {
    let action = clamp_action(action);
    let mut tau = [0.0; NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        let target = model.nominal_joints[j] + model.action_scale * action[j];
        let raw = model.kp * (target - q[j]) - model.kd * q_rate[j];
        tau[j] = raw.clamp(-model.torque_limit, model.torque_limit);
    }
    tau
}

/// World-frame foot position and velocity for one leg. Leg angles are
/// measured from the body-frame downward vertical, knee relative to the
/// upper link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootState {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

pub fn foot_kinematics(model: &RobotModel, state: &RobotDynState) -> [FootState; NUM_LEGS] {
    let pitch = state.root_pitch;
    let (sp, cp) = (libm::sin(pitch), libm::cos(pitch));
    let mut feet = [FootState {
        pos: [0.0, 0.0],
        vel: [0.0, 0.0],
    }; NUM_LEGS];
    for leg in 0..NUM_LEGS {
        let hx = model.hip_offsets[leg];
        let th = state.joint_angles[2 * leg];
        let tk = state.joint_angles[2 * leg + 1];
        let wh = state.pitch_rate + state.joint_rates[2 * leg];
        let wk = wh + state.joint_rates[2 * leg + 1];
        let a1 = pitch + th;
        let a2 = a1 + tk;
        let (s1, c1) = (libm::sin(a1), libm::cos(a1));
        let (s2, c2) = (libm::sin(a2), libm::cos(a2));
        let l1 = model.upper_len;
        let l2 = model.lower_len;
        // u(a) = (sin a, -cos a) points down the link
        feet[leg].pos = [
            state.root_pos[0] + hx * cp + l1 * s1 + l2 * s2,
            state.root_pos[1] + hx * sp - l1 * c1 - l2 * c2,
        ];
        feet[leg].vel = [
            state.root_vel[0] - state.pitch_rate * hx * sp + l1 * wh * c1 + l2 * wk * c2,
            state.root_vel[1] + state.pitch_rate * hx * cp + l1 * wh * s1 + l2 * wk * s2,
        ];
    }
    feet
}

/// Spring-damper normal force with tanh-smoothed Coulomb friction.
/// Returns (tangential, normal).
pub fn contact_force(model: &RobotModel, foot: &FootState) -> [f64; 2] {
    let z = foot.pos[1];
    if z >= 0.0 {
        return [0.0, 0.0];
    }
    let normal =
        (-model.contact_stiffness * z - model.contact_damping * foot.vel[1]).max(0.0);
    let tangential =
        -model.friction * normal * libm::tanh(foot.vel[0] / model.friction_smoothing_vel);
    [tangential, normal]
}

/// Per-control-step diagnostics.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepInfo {
    /// Torques applied during the final substep.
    pub torques: [f64; NUM_JOINTS],
    /// Foot in contact during the final substep.
    pub contact_flags: [bool; NUM_LEGS],
    /// Joint hit a limit (pre-clamp angle at or beyond a bound) during any
    /// substep of this control step.
    pub limit_violations: [bool; NUM_JOINTS],
}

/// Advance one control step (8 physics substeps of semi-implicit Euler).
pub fn step(
    model: &RobotModel,
    state: &RobotDynState,
    action: &[f64; NUM_JOINTS],
) -> Result<(RobotDynState, StepInfo), SimError> {
    let action = clamp_action(action);
    let mut s = *state;
    let dt = model.physics_dt;
    let mut info = StepInfo {
        torques: [0.0; NUM_JOINTS],
        contact_flags: [false; NUM_LEGS],
        limit_violations: [false; NUM_JOINTS],
    };
    for _ in 0..model.control_decimation {
        let tau = pd_torque(model, &s.joint_angles, &s.joint_rates, &action);
        // contact forces from the state at substep start
        let feet = foot_kinematics(model, &s);
        let mut force = [0.0, -model.root_mass * model.gravity];
        let mut moment = 0.0;
        let mut contact = [false; NUM_LEGS];
        for (leg, foot) in feet.iter().enumerate() {
            let f = contact_force(model, foot);
            if f != [0.0, 0.0] {
                contact[leg] = true;
            }
            force[0] += f[0];
            force[1] += f[1];
            let rx = foot.pos[0] - s.root_pos[0];
            let rz = foot.pos[1] - s.root_pos[1];
            moment += rx * f[1] - rz * f[0];
        }
        // root, semi-implicit
        s.root_vel[0] += force[0] / model.root_mass * dt;
        s.root_vel[1] += force[1] / model.root_mass * dt;
        s.root_pos[0] += s.root_vel[0] * dt;
        s.root_pos[1] += s.root_vel[1] * dt;
        s.pitch_rate += moment / model.root_inertia * dt;
        s.root_pitch += s.pitch_rate * dt;
        // decoupled joint dynamics, hard-clamped at the limits
        for j in 0..NUM_JOINTS {
            let qdd = (tau[j] - model.joint_damping * s.joint_rates[j]) / model.joint_inertia;
            s.joint_rates[j] += qdd * dt;
            s.joint_angles[j] += s.joint_rates[j] * dt;
            let (lo, hi) = model.joint_limits(j);
            if s.joint_angles[j] <= lo {
                info.limit_violations[j] = true;
                s.joint_angles[j] = lo;
                s.joint_rates[j] = 0.0;
            } else if s.joint_angles[j] >= hi {
                info.limit_violations[j] = true;
                s.joint_angles[j] = hi;
                s.joint_rates[j] = 0.0;
            }
        }
        info.torques = tau;
        info.contact_flags = contact;
    }
    s.prev_action = action;
    if !s.is_finite() {
        return Err(SimError::Diverged);
    }
    Ok((s, info))
}

pub fn extract_pose(state: &RobotDynState) -> RobotPose {
    RobotPose {
        root_height: state.root_pos[1],
        root_pitch: state.root_pitch,
        joint_angles: state.joint_angles,
    }
}

/// Observation s^r: pose (10), root velocity + pitch rate (3), joint rates
/// (8), previous action (8). Root x is deliberately absent.
pub fn extract_obs(state: &RobotDynState) -> Vec<f64> {
    let mut obs = extract_pose(state).to_vec();
    obs.push(state.root_vel[0]);
    obs.push(state.root_vel[1]);
    obs.push(state.pitch_rate);
    obs.extend_from_slice(&state.joint_rates);
    obs.extend_from_slice(&state.prev_action);
    debug_assert_eq!(obs.len(), OBS_DIM);
    obs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Running,
    Fell,
}

pub fn check_termination(model: &RobotModel, state: &RobotDynState) -> Termination {
    if state.root_pos[1] < model.fall_height || state.root_pitch.abs() > model.fall_pitch {
        Termination::Fell
    } else {
        Termination::Running
    }
}
