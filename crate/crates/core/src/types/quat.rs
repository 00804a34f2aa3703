use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const UNIT_TOLERANCE: f64 = 1e-6;

/// Rotation quaternion, scalar first. Composition follows the Hamilton
/// convention: `a.mul(&b)` applies `b` first, then `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub const fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Raw constructor; call [`normalize`](Self::normalize) if the input is not unit length.
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (0.5 * yaw).sin_cos();
        Self::new(c, 0.0, 0.0, s)
    }

    pub fn from_pitch(pitch: f64) -> Self {
        let (s, c) = (0.5 * pitch).sin_cos();
        Self::new(c, 0.0, s, 0.0)
    }

    pub fn from_roll(roll: f64) -> Self {
        let (s, c) = (0.5 * roll).sin_cos();
        Self::new(c, s, 0.0, 0.0)
    }

    /// Intrinsic Z-Y-X (yaw, then pitch, then roll) construction.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::from_yaw(yaw)
            .mul(&Self::from_pitch(pitch))
            .mul(&Self::from_roll(roll))
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn check_unit(&self) -> Result<()> {
        let n = self.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(invalid(format!("quaternion norm {n} is not unit")));
        }
        Ok(())
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let p = Self::new(0.0, v[0], v[1], v[2]);
        let r = self.mul(&p).mul(&self.conjugate());
        [r.x, r.y, r.z]
    }

    /// Heading angle of the Z-Y-X decomposition, in (-pi, pi].
    pub fn yaw(&self) -> f64 {
        let siny = 2.0 * (self.w * self.z + self.x * self.y);
        let cosy = 1.0 - 2.0 * (self.y * self.y + self.z * self.z);
        siny.atan2(cosy)
    }

    /// (roll, pitch, yaw) of the Z-Y-X decomposition.
    pub fn to_rpy(&self) -> [f64; 3] {
        let sinr = 2.0 * (self.w * self.x + self.y * self.z);
        let cosr = 1.0 - 2.0 * (self.x * self.x + self.y * self.y);
        let sinp = (2.0 * (self.w * self.y - self.z * self.x)).clamp(-1.0, 1.0);
        [sinr.atan2(cosr), sinp.asin(), self.yaw()]
    }

    /// Pure-yaw part of the orientation.
    pub fn yaw_part(&self) -> Self {
        Self::from_yaw(self.yaw())
    }

    /// Orientation with the heading removed, so that `self == yaw_part * roll_pitch_part`.
    pub fn roll_pitch_part(&self) -> Self {
        self.yaw_part().conjugate().mul(self).normalize()
    }

    /// Reflection through the sagittal (x-z) plane: roll and yaw flip sign, pitch is kept.
    pub fn mirrored(&self) -> Self {
        Self::new(self.w, -self.x, self.y, -self.z)
    }
}

/// Quaternion distance `1 - (a.b)^2`. Zero iff `a == ±b`, bounded by 1,
/// symmetric, and blind to the double cover.
pub fn qd(a: &UnitQuaternion, b: &UnitQuaternion) -> Result<f64> {
    a.check_unit()?;
    b.check_unit()?;
    // dividing by the norms makes qd(q, ±q) exactly zero despite rounding
    let d = a.dot(b);
    Ok((1.0 - d * d / (a.dot(a) * b.dot(b))).clamp(0.0, 1.0))
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}
