//! Standing-and-walking reward: thirteen additively weighted terms.
//!
//! Every term except the sparse feet-airtime term lies in (0, 1]. The total is
//! `sum(weight_i * term_i)`.

mod config;
mod terms;
mod tracker;

use serde::{Deserialize, Serialize};

pub use config::{RewardConfig, RewardScales, RewardWeights};
pub use terms::*;
pub use tracker::ContactTracker;

use crate::error::Result;
use crate::types::{Command, Observation};

pub const TERM_NAMES: [&str; 13] = [
    "vel_x",
    "vel_y",
    "yaw",
    "rollpitch",
    "feet_contact",
    "base_height",
    "feet_airtime",
    "feet_orientation",
    "feet_position",
    "arm",
    "base_accel",
    "action_diff",
    "torque",
];

/// Unweighted value of every term at one step, plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
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
    pub total: f64,
}

impl RewardBreakdown {
    /// Term values in [`TERM_NAMES`] order.
    pub fn terms(&self) -> [f64; 13] {
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

    pub fn weighted_sum(&self, w: &RewardWeights) -> f64 {
        self.terms()
            .iter()
            .zip(w.as_array())
            .map(|(t, w)| t * w)
            .sum()
    }

    /// Weighted total without the airtime contribution.
    pub fn bounded_total(&self, w: &RewardWeights) -> f64 {
        self.total - w.feet_airtime * self.feet_airtime
    }
}

/// Evaluate every term at `obs.time` and combine them.
pub fn total_reward(
    obs: &Observation,
    cmd: &Command,
    tracker: &ContactTracker,
    cfg: &RewardConfig,
) -> Result<(f64, RewardBreakdown)> {
    let (vel_x, vel_y) = r_velocity(obs, cmd, cfg)?;
    let mut b = RewardBreakdown {
        vel_x,
        vel_y,
        yaw: r_yaw(obs, cmd, cfg)?,
        rollpitch: r_rollpitch(obs, cfg)?,
        feet_contact: r_feet_contact(tracker, cmd, obs.time, cfg),
        base_height: r_base_height(obs, cfg)?,
        feet_airtime: r_feet_airtime(tracker, cmd, cfg),
        feet_orientation: r_feet_orientation(obs, cmd, cfg)?,
        feet_position: r_feet_position(obs, cmd, cfg)?,
        arm: r_arm(obs, cfg)?,
        base_accel: r_base_accel(obs, cfg)?,
        action_diff: r_action_diff(obs, cfg)?,
        torque: r_torque(obs, cfg)?,
        total: 0.0,
    };
    b.total = b.weighted_sum(&cfg.weights);
    Ok((b.total, b))
}
