use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-term weights of the additive reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub vel_x: f64,
    pub vel_y: f64,
    pub yaw: f64,
    pub rollpitch: f64,
    pub feet_contact: f64,
    pub base_height: f64,
    pub feet_airtime: f64,
    pub feet_orientation: f64,
    pub feet_position: f64,
    pub arm: f64,
    pub base_accel: f64,
    pub action_diff: f64,
    pub torque: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            vel_x: 0.15,
            vel_y: 0.15,
            yaw: 0.1,
            rollpitch: 0.2,
            feet_contact: 0.1,
            base_height: 0.05,
            feet_airtime: 1.0,
            feet_orientation: 0.05,
            feet_position: 0.05,
            arm: 0.03,
            base_accel: 0.1,
            action_diff: 0.02,
            torque: 0.02,
        }
    }
}

impl RewardWeights {
    pub fn as_array(&self) -> [f64; 13] {
        [
            self.vel_x,
            self.vel_y,
            self.yaw,
            self.rollpitch,
            self.feet_contact,
            self.base_height,
            self.feet_airtime,
            self.feet_orientation,
            self.feet_position,
            self.arm,
            self.base_accel,
            self.action_diff,
            self.torque,
        ]
    }

    /// Sum of every weight except the sparse airtime term.
    pub fn bounded_sum(&self) -> f64 {
        self.as_array().iter().sum::<f64>() - self.feet_airtime
    }
}

/// Exponential decay rates used inside the bounded terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardScales {
    pub velocity: f64,
    pub yaw: f64,
    pub rollpitch: f64,
    pub base_height: f64,
    pub feet_position: f64,
    pub feet_orientation: f64,
    pub arm: f64,
    pub base_accel: f64,
    pub action_diff: f64,
    pub torque: f64,
}

impl Default for RewardScales {
    fn default() -> Self {
        Self {
            velocity: 5.0,
            yaw: 300.0,
            rollpitch: 30.0,
            base_height: 20.0,
            feet_position: 3.0,
            feet_orientation: 1.0,
            arm: 3.0,
            base_accel: 0.01,
            action_diff: 0.02,
            torque: 0.02,
        }
    }
}

/// Weights, scales and nominal targets for the standing-and-walking reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub scales: RewardScales,
    /// Target base height, m.
    pub c_h: f64,
    /// Window after a single-contact step during which the contact term still pays, s.
    pub grace: f64,
    /// Airtime that breaks even at touchdown, s.
    pub airtime_threshold: f64,
    /// Nominal stance foot positions relative to the base (heading frame), m.
    pub c_feet: [[f64; 3]; 2],
    /// Nominal foot roll-pitch-yaw, rad.
    pub c_feet_rpy: [[f64; 3]; 2],
    /// Nominal posture-group joint angles, rad.
    pub c_arm: Vec<f64>,
    /// Per-actuator torque limits, N·m.
    pub t_max: Vec<f64>,
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self
            .weights
            .as_array()
            .iter()
            .any(|w| !(*w >= 0.0) || !w.is_finite())
        {
            return Err(invalid("reward weights must be finite and non-negative"));
        }
        if !(self.grace > 0.0) {
            return Err(invalid("grace period must be positive"));
        }
        if !(self.airtime_threshold > 0.0) {
            return Err(invalid("airtime threshold must be positive"));
        }
        if self.t_max.is_empty() || self.t_max.iter().any(|t| !(*t > 0.0)) {
            return Err(invalid("torque limits must be positive and non-empty"));
        }
        if !self.c_h.is_finite() {
            return Err(invalid("target base height must be finite"));
        }
        Ok(())
    }
}
