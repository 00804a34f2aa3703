use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::types::{IndexMirror, MirrorSpec};

/// A rigid link hanging from its proximal joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// m
    pub length: f64,
    /// kg
    pub mass: f64,
    /// kg·m² about the centre of mass
    pub inertia: f64,
    /// Distance of the centre of mass from the proximal joint along the link, m.
    pub com: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootParams {
    pub mass: f64,
    pub inertia: f64,
    /// Sole depth below the ankle axis, m.
    pub ankle_height: f64,
    /// Sole extent behind and ahead of the ankle, m.
    pub heel: f64,
    pub toe: f64,
    /// Centre of mass in the foot frame (forward, up), m.
    pub com: [f64; 2],
}

impl FootParams {
    pub fn length(&self) -> f64 {
        self.heel + self.toe
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmParams {
    /// Shoulder position above the hip along the torso axis, m.
    pub shoulder_height: f64,
    pub link: LinkParams,
}

/// PD servo and mechanical limits of one actuated joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointParams {
    /// N·m/rad
    pub kp: f64,
    /// N·m·s/rad
    pub kd: f64,
    /// N·m
    pub t_max: f64,
    /// rad
    pub lower: f64,
    pub upper: f64,
    /// Reflected rotor inertia, kg·m².
    pub armature: f64,
}

/// Planar biped: floating torso (x, z, pitch), two hip-knee-ankle legs with
/// flat feet, optional single-joint arms.
///
/// Angles follow a right-handed rotation about the lateral (+y) axis, so a
/// positive pitch tips the torso forward and a positive hip angle swings the
/// leg backward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    /// Torso from hip axis upward; `com` is above the hip.
    pub torso: LinkParams,
    pub thigh: LinkParams,
    pub shank: LinkParams,
    pub foot: FootParams,
    pub arms: Option<ArmParams>,
    pub hip: JointParams,
    pub knee: JointParams,
    pub ankle: JointParams,
    pub shoulder: JointParams,
    /// Nominal standing base (hip) height, m.
    pub nominal_height: f64,
    /// Height of the push attachment above the hip along the torso axis, m.
    pub push_height: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        Self {
            torso: LinkParams {
                length: 0.5,
                mass: 16.0,
                inertia: 0.35,
                com: 0.2,
            },
            thigh: LinkParams {
                length: 0.4,
                mass: 4.0,
                inertia: 0.053,
                com: 0.17,
            },
            shank: LinkParams {
                length: 0.4,
                mass: 2.5,
                inertia: 0.033,
                com: 0.17,
            },
            foot: FootParams {
                mass: 1.0,
                inertia: 0.004,
                ankle_height: 0.04,
                heel: 0.06,
                toe: 0.14,
                com: [0.04, -0.02],
            },
            arms: Some(ArmParams {
                shoulder_height: 0.45,
                link: LinkParams {
                    length: 0.4,
                    mass: 0.5,
                    inertia: 0.0067,
                    com: 0.2,
                },
            }),
            hip: JointParams {
                kp: 300.0,
                kd: 8.0,
                t_max: 120.0,
                lower: -1.6,
                upper: 1.0,
                armature: 0.05,
            },
            knee: JointParams {
                kp: 300.0,
                kd: 8.0,
                t_max: 120.0,
                lower: 0.0,
                upper: 2.4,
                armature: 0.05,
            },
            ankle: JointParams {
                kp: 100.0,
                kd: 3.0,
                t_max: 50.0,
                lower: -0.9,
                upper: 0.9,
                armature: 0.02,
            },
            shoulder: JointParams {
                kp: 30.0,
                kd: 1.0,
                t_max: 20.0,
                lower: -2.0,
                upper: 2.0,
                armature: 0.01,
            },
            nominal_height: 0.8,
            push_height: 0.22,
        }
    }
}

impl RobotModel {
    /// Same body without arms.
    pub fn without_arms() -> Self {
        Self {
            arms: None,
            ..Self::default()
        }
    }

    pub fn has_arms(&self) -> bool {
        self.arms.is_some()
    }

    /// Actuators in order: left hip, knee, ankle, right hip, knee, ankle, then left and right shoulder.
    pub fn num_actuators(&self) -> usize {
        if self.has_arms() {
            8
        } else {
            6
        }
    }

    /// Generalized coordinates: x, z, pitch, then one per actuator.
    pub fn num_dof(&self) -> usize {
        3 + self.num_actuators()
    }

    pub fn joint(&self, actuator: usize) -> &JointParams {
        match actuator {
            0 | 3 => &self.hip,
            1 | 4 => &self.knee,
            2 | 5 => &self.ankle,
            _ => &self.shoulder,
        }
    }

    pub fn arm_actuators(&self) -> std::ops::Range<usize> {
        if self.has_arms() {
            6..8
        } else {
            6..6
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.torso.mass
            + 2.0 * (self.thigh.mass + self.shank.mass + self.foot.mass)
            + self.arms.as_ref().map_or(0.0, |a| 2.0 * a.link.mass)
    }

    /// Knee-flex angle of each leg segment that puts the hip at `nominal_height`
    /// with level feet directly below it.
    pub fn nominal_leg_angle(&self) -> f64 {
        let reach = self.nominal_height - self.foot.ankle_height;
        let cos = reach / (self.thigh.length + self.shank.length);
        cos.clamp(-1.0, 1.0).acos()
    }

    /// Nominal standing setpoints, actuator order.
    pub fn nominal_pose(&self) -> Vec<f64> {
        let a = self.nominal_leg_angle();
        let mut p = vec![-a, 2.0 * a, -a, -a, 2.0 * a, -a];
        if self.has_arms() {
            p.extend([0.0, 0.0]);
        }
        p
    }

    pub fn torque_limits(&self) -> Vec<f64> {
        (0..self.num_actuators())
            .map(|i| self.joint(i).t_max)
            .collect()
    }

    pub fn nominal_arm_pose(&self) -> Vec<f64> {
        self.arm_actuators()
            .map(|i| self.nominal_pose()[i])
            .collect()
    }

    /// Sole-centre positions relative to the hip in the nominal stance (heading frame).
    pub fn nominal_feet(&self) -> [[f64; 3]; 2] {
        let a = self.nominal_leg_angle();
        // ankle sits directly below the hip; sole centre is midway between heel and toe
        let ankle_z = -(self.thigh.length + self.shank.length) * a.cos();
        let x = 0.5 * (self.foot.toe - self.foot.heel);
        let p = [x, 0.0, ankle_z - self.foot.ankle_height];
        [p, p]
    }

    /// Length of the policy feature vector for this body.
    pub fn feature_dim(&self) -> usize {
        2 * self.num_actuators() + 4 + 3
    }

    /// Left/right swap maps consistent with the actuator ordering.
    pub fn mirror_spec(&self) -> MirrorSpec {
        let n = self.num_actuators();
        let mut perm: Vec<usize> = vec![3, 4, 5, 0, 1, 2];
        if self.has_arms() {
            perm.extend([7, 6]);
        }
        let act = IndexMirror::new(perm, vec![1.0; n]).expect("static mirror map");
        let quat = IndexMirror::new(vec![0, 1, 2, 3], vec![1.0, -1.0, 1.0, -1.0])
            .expect("static mirror map");
        let cmd =
            IndexMirror::new(vec![0, 1, 2], vec![1.0, -1.0, -1.0]).expect("static mirror map");
        let obs = act.concat(&act).concat(&quat).concat(&cmd);
        let arm = if self.has_arms() {
            IndexMirror::new(vec![1, 0], vec![1.0, 1.0]).expect("static mirror map")
        } else {
            IndexMirror::identity(0)
        };
        MirrorSpec {
            obs,
            act,
            joint: IndexMirror::identity(0),
            arm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut links = vec![
            ("torso", &self.torso),
            ("thigh", &self.thigh),
            ("shank", &self.shank),
        ];
        if let Some(a) = &self.arms {
            links.push(("arm", &a.link));
            if !(a.shoulder_height > 0.0) {
                return Err(invalid("shoulder height must be positive"));
            }
        }
        for (name, l) in links {
            if !(l.length > 0.0 && l.mass > 0.0 && l.inertia > 0.0) {
                return Err(invalid(format!(
                    "{name}: length, mass and inertia must be positive"
                )));
            }
        }
        let f = &self.foot;
        if !(f.mass > 0.0
            && f.inertia > 0.0
            && f.ankle_height > 0.0
            && f.heel >= 0.0
            && f.toe > 0.0)
        {
            return Err(invalid("foot parameters must be positive"));
        }
        for (name, j) in [
            ("hip", &self.hip),
            ("knee", &self.knee),
            ("ankle", &self.ankle),
            ("shoulder", &self.shoulder),
        ] {
            if !(j.kp > 0.0 && j.kd > 0.0 && j.t_max > 0.0) {
                return Err(invalid(format!(
                    "{name}: kp, kd and t_max must be positive"
                )));
            }
            if !(j.lower < j.upper) || !(j.armature >= 0.0) {
                return Err(invalid(format!("{name}: bad joint limits or armature")));
            }
        }
        let reach = self.thigh.length + self.shank.length + self.foot.ankle_height;
        if !(self.nominal_height > self.foot.ankle_height && self.nominal_height <= reach) {
            return Err(invalid("nominal height is not reachable by the legs"));
        }
        let pose = self.nominal_pose();
        for (i, q) in pose.iter().enumerate() {
            let j = self.joint(i);
            if *q < j.lower || *q > j.upper {
                return Err(invalid(format!("nominal pose violates joint {i} limits")));
            }
        }
        Ok(())
    }
}
