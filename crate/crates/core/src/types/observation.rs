use serde::{Deserialize, Serialize};

use super::quat::UnitQuaternion;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Generalized robot state seen by the rewards and the policy at one control step.
///
/// Foot positions are relative to the base and expressed in the gravity-aligned
/// heading frame; foot orientations are roll-pitch-yaw in the same frame.
/// Index 0 of every per-foot array is the left foot.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Observation {
    pub motor_pos: Vec<f64>,
    pub motor_vel: Vec<f64>,
    pub joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
    pub torso_orientation: UnitQuaternion,
    pub base_pos: [f64; 3],
    pub base_linvel: [f64; 3],
    pub base_acc: [f64; 3],
    pub foot_pos: [[f64; 3]; 2],
    pub foot_orientation: [[f64; 3]; 2],
    pub contact: [bool; 2],
    pub airtime: [f64; 2],
    pub touchdown: [bool; 2],
    pub arm_pos: Vec<f64>,
    pub applied_torque: Vec<f64>,
    pub prev_action: Vec<f64>,
    pub action: Vec<f64>,
    pub time: f64,
}

impl Observation {
    /// Base velocity rotated into the heading frame (x forward, y left).
    pub fn heading_linvel(&self) -> [f64; 3] {
        let yaw = self.torso_orientation.yaw();
        let (s, c) = yaw.sin_cos();
        let v = self.base_linvel;
        [c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]]
    }

    /// World position of a foot, reconstructed from the base pose.
    pub fn world_foot_pos(&self, foot: usize) -> [f64; 3] {
        let yaw = self.torso_orientation.yaw();
        let (s, c) = yaw.sin_cos();
        let p = self.foot_pos[foot];
        [
            self.base_pos[0] + c * p[0] - s * p[1],
            self.base_pos[1] + s * p[0] + c * p[1],
            self.base_pos[2] + p[2],
        ]
    }

    pub fn contact_count(&self) -> usize {
        self.contact.iter().filter(|&&c| c).count()
    }

    pub fn is_finite(&self) -> bool {
        let vecs = [
            &self.motor_pos,
            &self.motor_vel,
            &self.joint_pos,
            &self.joint_vel,
            &self.arm_pos,
            &self.applied_torque,
            &self.prev_action,
            &self.action,
        ];
        vecs.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.torso_orientation.is_finite()
            && self
                .base_pos
                .iter()
                .chain(&self.base_linvel)
                .chain(&self.base_acc)
                .all(|x| x.is_finite())
            && self.foot_pos.iter().flatten().all(|x| x.is_finite())
            && self
                .foot_orientation
                .iter()
                .flatten()
                .all(|x| x.is_finite())
            && self.airtime.iter().all(|x| x.is_finite())
            && self.time.is_finite()
    }
}
