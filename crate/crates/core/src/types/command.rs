use serde::{Deserialize, Serialize};

use super::quat::{wrap_angle, UnitQuaternion};

/// User velocity command plus the absolute heading it integrates into.
///
/// Velocities are expressed in the gravity-aligned heading frame of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    /// Sagittal velocity, m/s.
    pub c_x: f64,
    /// Lateral velocity, m/s.
    pub c_y: f64,
    /// Yaw rate, rad/s.
    pub c_yaw: f64,
    /// Absolute heading target in (-pi, pi], advanced by `c_yaw * dt` each control step.
    #[serde(default)]
    pub heading_ref: f64,
}

impl Command {
    pub fn new(c_x: f64, c_y: f64, c_yaw: f64) -> Self {
        Self {
            c_x,
            c_y,
            c_yaw,
            heading_ref: 0.0,
        }
    }

    pub fn standing() -> Self {
        Self::default()
    }

    pub fn with_heading(mut self, heading: f64) -> Self {
        self.heading_ref = wrap_angle(heading);
        self
    }

    pub fn is_standing(&self) -> bool {
        self.c_x == 0.0 && self.c_y == 0.0 && self.c_yaw == 0.0
    }

    pub fn velocity(&self) -> [f64; 3] {
        [self.c_x, self.c_y, self.c_yaw]
    }

    /// Integrate the yaw rate over one control period.
    pub fn advance_heading(&mut self, dt: f64) {
        self.heading_ref = wrap_angle(self.heading_ref + self.c_yaw * dt);
    }

    /// Sagittal-plane reflection: `(c_x, c_y, c_yaw) -> (c_x, -c_y, -c_yaw)`.
    pub fn mirrored(&self) -> Self {
        Self {
            c_x: self.c_x,
            c_y: -self.c_y,
            c_yaw: -self.c_yaw,
            heading_ref: -self.heading_ref,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c_x.is_finite()
            && self.c_y.is_finite()
            && self.c_yaw.is_finite()
            && self.heading_ref.is_finite()
    }
}

/// Pure-yaw target orientation at the command's heading.
pub fn yaw_quat(c: &Command) -> UnitQuaternion {
    UnitQuaternion::from_yaw(c.heading_ref)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standing_only_for_exact_zero() {
        assert!(Command::standing().is_standing());
        assert!(!Command::new(1e-300, 0.0, 0.0).is_standing());
        assert!(!Command::new(0.0, -0.1, 0.0).is_standing());
        assert!(!Command::new(0.0, 0.0, 0.5).is_standing());
        // heading alone does not make a motion command
        assert!(Command::standing().with_heading(1.0).is_standing());
    }

    #[test]
    fn heading_wraps() {
        let mut c = Command::new(0.0, 0.0, 0.5).with_heading(3.1);
        c.advance_heading(0.2);
        assert!(c.heading_ref <= std::f64::consts::PI && c.heading_ref > -std::f64::consts::PI);
        assert!((c.heading_ref - (3.2 - 2.0 * std::f64::consts::PI)).abs() < 1e-12);
    }

    #[test]
    fn yaw_quat_at_zero_heading_is_identity() {
        assert_eq!(yaw_quat(&Command::standing()), UnitQuaternion::identity());
    }

    #[test]
    fn mirror_is_involution() {
        let c = Command::new(0.7, -0.2, 0.3).with_heading(0.4);
        assert_eq!(c.mirrored().mirrored(), c);
    }
}
