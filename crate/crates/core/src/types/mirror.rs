use serde::{Deserialize, Serialize};

use super::observation::Observation;
use crate::error::{invalid, Result};

/// Signed index permutation: `out[i] = signs[i] * v[permutation[i]]`.
///
/// Only involutions are constructible, so applying the map twice restores
/// the input bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIndexMirror", into = "RawIndexMirror")]
pub struct IndexMirror {
    permutation: Vec<usize>,
    signs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawIndexMirror {
    permutation: Vec<usize>,
    signs: Vec<f64>,
}

impl TryFrom<RawIndexMirror> for IndexMirror {
    type Error = crate::Error;
    fn try_from(r: RawIndexMirror) -> Result<Self> {
        IndexMirror::new(r.permutation, r.signs)
    }
}

impl From<IndexMirror> for RawIndexMirror {
    fn from(m: IndexMirror) -> Self {
        RawIndexMirror {
            permutation: m.permutation,
            signs: m.signs,
        }
    }
}

impl IndexMirror {
    pub fn new(permutation: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        let n = permutation.len();
        if signs.len() != n {
            return Err(invalid(format!(
                "mirror has {n} indices but {} signs",
                signs.len()
            )));
        }
        for (i, (&p, &s)) in permutation.iter().zip(&signs).enumerate() {
            if p >= n {
                return Err(invalid(format!("mirror index {p} out of range {n}")));
            }
            if s != 1.0 && s != -1.0 {
                return Err(invalid(format!("mirror sign {s} must be +1 or -1")));
            }
            if permutation[p] != i || signs[p] * s != 1.0 {
                return Err(invalid(format!("mirror is not an involution at index {i}")));
            }
        }
        Ok(Self { permutation, signs })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            permutation: (0..n).collect(),
            signs: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(invalid(format!(
                "mirror expects length {}, got {}",
                self.len(),
                v.len()
            )));
        }
        Ok(self.apply_unchecked(v))
    }

    pub(crate) fn apply_unchecked(&self, v: &[f64]) -> Vec<f64> {
        self.permutation
            .iter()
            .zip(&self.signs)
            .map(|(&p, &s)| s * v[p])
            .collect()
    }

    /// `M^T u`, used when backpropagating through the map.
    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (i, (&p, &s)) in self.permutation.iter().zip(&self.signs).enumerate() {
            out[p] += s * u[i];
        }
        out
    }

    /// Concatenate two maps acting on adjacent index blocks.
    pub fn concat(&self, other: &IndexMirror) -> IndexMirror {
        let off = self.len();
        let mut permutation = self.permutation.clone();
        permutation.extend(other.permutation.iter().map(|p| p + off));
        let mut signs = self.signs.clone();
        signs.extend_from_slice(&other.signs);
        IndexMirror { permutation, signs }
    }
}

/// Left/right reflection operators for observations, policy features and actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSpec {
    /// Policy feature vector (state features followed by the three command entries).
    pub obs: IndexMirror,
    /// Actuator-indexed arrays: actions, motor positions/velocities, torques.
    pub act: IndexMirror,
    /// Passive joints.
    pub joint: IndexMirror,
    /// Posture-group (arm) joints.
    pub arm: IndexMirror,
}

impl MirrorSpec {
    pub fn mirror_act(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.act.apply(a)
    }

    pub fn mirror_features(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.obs.apply(f)
    }

    pub fn mirror_obs(&self, o: &Observation) -> Result<Observation> {
        let act = |v: &Vec<f64>, what: &str| {
            self.act
                .apply(v)
                .map_err(|e| invalid(format!("{what}: {e}")))
        };
        let lat = |v: [f64; 3]| [v[0], -v[1], v[2]];
        let rpy = |v: [f64; 3]| [-v[0], v[1], -v[2]];
        Ok(Observation {
            motor_pos: act(&o.motor_pos, "motor_pos")?,
            motor_vel: act(&o.motor_vel, "motor_vel")?,
            joint_pos: self.joint.apply(&o.joint_pos)?,
            joint_vel: self.joint.apply(&o.joint_vel)?,
            torso_orientation: o.torso_orientation.mirrored(),
            base_pos: lat(o.base_pos),
            base_linvel: lat(o.base_linvel),
            base_acc: lat(o.base_acc),
            foot_pos: [lat(o.foot_pos[1]), lat(o.foot_pos[0])],
            foot_orientation: [rpy(o.foot_orientation[1]), rpy(o.foot_orientation[0])],
            contact: [o.contact[1], o.contact[0]],
            airtime: [o.airtime[1], o.airtime[0]],
            touchdown: [o.touchdown[1], o.touchdown[0]],
            arm_pos: self.arm.apply(&o.arm_pos)?,
            applied_torque: act(&o.applied_torque, "applied_torque")?,
            prev_action: act(&o.prev_action, "prev_action")?,
            action: act(&o.action, "action")?,
            time: o.time,
        })
    }
}
