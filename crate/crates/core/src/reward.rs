//! Per-step reward assembly: correspondence, root tracking, action penalty,
//! and joint-limit penalty, combined by a weighted sum under one of three
//! ablation modes.

use serde::{Deserialize, Serialize};

use crate::sim::{RobotModel, NUM_JOINTS};

/// Ratio of robot nominal height to source standing height; scales the
/// source root trajectory into the robot's workspace.
pub const ROOT_TRACK_SCALE: f64 = 0.42 / 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Full,
    TaskOnly,
    R2hOnly,
}

impl RewardMode {
    pub fn parse(s: &str) -> Option<RewardMode> {
        match s {
            "full" => Some(RewardMode::Full),
            "task_only" => Some(RewardMode::TaskOnly),
            "r2h_only" => Some(RewardMode::R2hOnly),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RewardMode::Full => "full",
            RewardMode::TaskOnly => "task_only",
            RewardMode::R2hOnly => "r2h_only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub w_cpd: f64,
    pub w_root: f64,
    pub w_tor: f64,
    pub w_lim: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_cpd: 1.0,
            w_root: 1.0,
            w_tor: 0.0001,
            w_lim: 5.0,
        }
    }
}

/// Weights actually applied under a mode; task_only zeroes w_cpd.
pub fn effective_weights(weights: &RewardWeights, mode: RewardMode) -> RewardWeights {
    match mode {
        RewardMode::TaskOnly => RewardWeights {
            w_cpd: 0.0,
            ..*weights
        },
        _ => *weights,
    }
}

/// Raw reward components for one step. `r_cpd` is the full two-term
/// correspondence reward, `r_cpd_r2h` the cycle-free variant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardComponents {
    pub r_cpd: f64,
    pub r_cpd_r2h: f64,
    pub r_root: f64,
    pub r_tor: f64,
    pub r_lim: f64,
}

/// Logged per-step breakdown. `r_cpd` holds the correspondence variant the
/// active mode feeds into the total, so recombining the components with the
/// effective weights always reproduces `r_total`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_cpd: f64,
    pub r_root: f64,
    pub r_tor: f64,
    pub r_lim: f64,
    pub r_total: f64,
}

/// exp(-||s_root - desired||): root position/velocity tracking in (0, 1].
pub fn root_reward(s_root: [f64; 2], desired: [f64; 2]) -> f64 {
    let dx = s_root[0] - desired[0];
    let dv = s_root[1] - desired[1];
    libm::exp(-libm::sqrt(dx * dx + dv * dv))
}

/// -||a||: the regularization penalty applied to the action vector.
pub fn torque_penalty(action: &[f64]) -> f64 {
    -libm::sqrt(action.iter().map(|a| a * a).sum())
}

/// Alternative penalty on the applied torques, normalized by the torque
/// limit so its scale matches the action penalty. Off by default.
pub fn torque_norm_penalty(model: &RobotModel, torques: &[f64; NUM_JOINTS]) -> f64 {
    -libm::sqrt(torques.iter().map(|t| t * t).sum()) / model.torque_limit
}

/// Count of joints at or beyond either bound, negated.
pub fn limit_penalty(model: &RobotModel, joint_angles: &[f64; NUM_JOINTS]) -> f64 {
    let mut count = 0;
    for (j, &q) in joint_angles.iter().enumerate() {
        let (lo, hi) = model.joint_limits(j);
        if q <= lo || q >= hi {
            count += 1;
        }
    }
    -(count as f64)
}

/// Same penalty from the simulator's per-substep violation flags (a joint
/// pinned at its stop during any substep counts).
pub fn limit_penalty_from_flags(violations: &[bool; NUM_JOINTS]) -> f64 {
    -(violations.iter().filter(|&&v| v).count() as f64)
}

/// Weighted sum of the components under the active mode. In task_only the
/// correspondence term is excluded from the total but still logged; in
/// r2h_only the cycle-free variant replaces it.
pub fn total_reward(
    components: &RewardComponents,
    weights: &RewardWeights,
    mode: RewardMode,
) -> RewardBreakdown {
    let eff = effective_weights(weights, mode);
    let r_cpd = match mode {
        RewardMode::R2hOnly => components.r_cpd_r2h,
        _ => components.r_cpd,
    };
    let r_total = eff.w_cpd * r_cpd
        + eff.w_root * components.r_root
        + eff.w_tor * components.r_tor
        + eff.w_lim * components.r_lim;
    RewardBreakdown {
        r_cpd,
        r_root: components.r_root,
        r_tor: components.r_tor,
        r_lim: components.r_lim,
        r_total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_reward_spot_values() {
        assert_eq!(root_reward([1.0, 2.0], [1.0, 2.0]), 1.0);
        let r = root_reward([1.0, 0.0], [0.0, 0.0]);
        assert!((r - libm::exp(-1.0)).abs() < 1e-12);
        // symmetric in the sign of the deviation
        assert_eq!(root_reward([1.0, 0.5], [0.0, 0.0]), root_reward([-1.0, -0.5], [0.0, 0.0]));
    }

    #[test]
    fn torque_penalty_euclidean() {
        assert_eq!(torque_penalty(&[0.0; 8]), 0.0);
        let mut a = [0.0; 8];
        a[0] = 3.0;
        a[1] = 4.0;
        assert!((torque_penalty(&a) + 5.0).abs() < 1e-12);
        // scale homogeneous
        let b: alloc::vec::Vec<f64> = a.iter().map(|v| -2.0 * v).collect();
        assert!((torque_penalty(&b) - 2.0 * torque_penalty(&a)).abs() < 1e-12);
    }

    #[test]
    fn limit_penalty_counts_pinned_joints() {
        let m = RobotModel::default();
        assert_eq!(limit_penalty(&m, &m.nominal_joints), 0.0);
        let mut q = m.nominal_joints;
        q[0] = m.hip_limits.1; // at bound counts
        q[1] = m.knee_limits.0;
        q[2] = m.hip_limits.0 - 0.1; // beyond bound
        assert_eq!(limit_penalty(&m, &q), -3.0);
        let flags = [true, true, true, false, false, false, false, false];
        assert_eq!(limit_penalty_from_flags(&flags), -3.0);
        // never positive
        assert!(limit_penalty(&m, &[10.0; 8]) <= 0.0);
    }

    fn components(cpd: f64, root: f64, tor: f64, lim: f64) -> RewardComponents {
        RewardComponents {
            r_cpd: cpd,
            r_cpd_r2h: cpd,
            r_root: root,
            r_tor: tor,
            r_lim: lim,
        }
    }

    #[test]
    fn default_weights_spot_value() {
        // components (1, 1, -2, 0) with the default weights -> 1.9998
        let b = total_reward(&components(1.0, 1.0, -2.0, 0.0), &RewardWeights::default(), RewardMode::Full);
        assert_eq!(b.r_total, 1.9998);
    }

    #[test]
    fn task_only_drops_correspondence_from_total() {
        let w = RewardWeights::default();
        let b = total_reward(&components(1.0, 1.0, -2.0, 0.0), &w, RewardMode::TaskOnly);
        assert!((b.r_total - 0.9998).abs() < 1e-12);
        // still logged
        assert_eq!(b.r_cpd, 1.0);
        assert_eq!(effective_weights(&w, RewardMode::TaskOnly).w_cpd, 0.0);
    }

    #[test]
    fn all_zero_components_zero_total_in_every_mode() {
        for mode in [RewardMode::Full, RewardMode::TaskOnly, RewardMode::R2hOnly] {
            let b = total_reward(&components(0.0, 0.0, 0.0, 0.0), &RewardWeights::default(), mode);
            assert_eq!(b.r_total, 0.0);
        }
    }

    #[test]
    fn r2h_only_uses_cycle_free_variant() {
        let c = RewardComponents {
            r_cpd: 0.4,
            r_cpd_r2h: 0.7,
            r_root: 0.0,
            r_tor: 0.0,
            r_lim: 0.0,
        };
        let b = total_reward(&c, &RewardWeights::default(), RewardMode::R2hOnly);
        assert_eq!(b.r_cpd, 0.7);
        assert_eq!(b.r_total, 0.7);
        // modes coincide when the cycle error is zero (variants equal)
        let c_eq = components(0.6, 0.2, -0.1, 0.0);
        let full = total_reward(&c_eq, &RewardWeights::default(), RewardMode::Full);
        let r2h = total_reward(&c_eq, &RewardWeights::default(), RewardMode::R2hOnly);
        assert_eq!(full.r_total, r2h.r_total);
    }

    #[test]
    fn breakdown_recombines_exactly() {
        let w = RewardWeights::default();
        for mode in [RewardMode::Full, RewardMode::TaskOnly, RewardMode::R2hOnly] {
            let b = total_reward(&components(0.37, 0.81, -1.3, -2.0), &w, mode);
            let eff = effective_weights(&w, mode);
            let recombined =
                eff.w_cpd * b.r_cpd + eff.w_root * b.r_root + eff.w_tor * b.r_tor + eff.w_lim * b.r_lim;
            assert!((recombined - b.r_total).abs() < 1e-12);
        }
    }

    #[test]
    fn total_bounded_by_positive_weights() {
        // r_cpd, r_root in (0,1]; r_tor <= 0; r_lim <= 0
        let w = RewardWeights::default();
        let b = total_reward(&components(1.0, 1.0, 0.0, 0.0), &w, RewardMode::Full);
        assert!(b.r_total <= w.w_cpd + w.w_root);
    }
}
