use crate::error::{invalid, Result};
use crate::types::{qd, rp_quat, wrap_angle, yaw_quat, Command, Observation, UnitQuaternion};

use super::{ContactTracker, RewardConfig};

fn finite3(v: &[f64; 3], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} is not finite")))
    }
}

/// Velocity tracking per heading-frame axis `(r_x, r_y)`.
///
/// Walking commands use a squared error; the standing command uses the
/// absolute error so the term stays in (0, 1].
pub fn r_velocity(obs: &Observation, cmd: &Command, cfg: &RewardConfig) -> Result<(f64, f64)> {
    finite3(&obs.base_linvel, "base velocity")?;
    let v = obs.heading_linvel();
    let k = cfg.scales.velocity;
    let term = |err: f64| {
        if cmd.is_standing() {
            (-k * err.abs()).exp()
        } else {
            (-k * err * err).exp()
        }
    };
    Ok((term(v[0] - cmd.c_x), term(v[1] - cmd.c_y)))
}

pub fn r_yaw(obs: &Observation, cmd: &Command, cfg: &RewardConfig) -> Result<f64> {
    let d = qd(&obs.torso_orientation.yaw_part(), &yaw_quat(cmd))?;
    Ok((-cfg.scales.yaw * d).exp())
}

pub fn r_rollpitch(obs: &Observation, cfg: &RewardConfig) -> Result<f64> {
    obs.torso_orientation.check_unit()?;
    let d = qd(&rp_quat(obs), &UnitQuaternion::identity())?;
    Ok((-cfg.scales.rollpitch * d).exp())
}

/// 1 under the standing command or if exactly one foot touched the ground within the grace window.
pub fn r_feet_contact(
    tracker: &ContactTracker,
    cmd: &Command,
    now: f64,
    cfg: &RewardConfig,
) -> f64 {
    if cmd.is_standing() || tracker.single_contact_within(now, cfg.grace) {
        1.0
    } else {
        0.0
    }
}

pub fn r_base_height(obs: &Observation, cfg: &RewardConfig) -> Result<f64> {
    let z = obs.base_pos[2];
    if !z.is_finite() {
        return Err(invalid("base height is not finite"));
    }
    Ok((-cfg.scales.base_height * (z - cfg.c_h).abs()).exp())
}

/// Sparse touchdown term: constant 1 when standing, otherwise the sum over
/// touching-down feet of `airtime - threshold`.
pub fn r_feet_airtime(tracker: &ContactTracker, cmd: &Command, cfg: &RewardConfig) -> f64 {
    if cmd.is_standing() {
        return 1.0;
    }
    let td = tracker.touchdown();
    let air = tracker.touchdown_airtime();
    (0..2)
        .filter(|&f| td[f])
        .map(|f| air[f] - cfg.airtime_threshold)
        .sum()
}

/// Feet level and pointing forward; yaw is free while a rotation is commanded.
pub fn r_feet_orientation(obs: &Observation, cmd: &Command, cfg: &RewardConfig) -> Result<f64> {
    let with_yaw = cmd.c_yaw.abs() == 0.0;
    let mut err = 0.0;
    for f in 0..2 {
        let r = obs.foot_orientation[f];
        let c = cfg.c_feet_rpy[f];
        finite3(&r, "foot orientation")?;
        err += (r[0] - c[0]).abs() + (r[1] - c[1]).abs();
        if with_yaw {
            err += wrap_angle(r[2] - c[2]).abs();
        }
    }
    Ok((-cfg.scales.feet_orientation * err).exp())
}

/// Stance shape while standing (L1 offset from the nominal foot positions); 1 while walking.
pub fn r_feet_position(obs: &Observation, cmd: &Command, cfg: &RewardConfig) -> Result<f64> {
    if !cmd.is_standing() {
        return Ok(1.0);
    }
    let mut err = 0.0;
    for f in 0..2 {
        finite3(&obs.foot_pos[f], "foot position")?;
        for k in 0..3 {
            err += (obs.foot_pos[f][k] - cfg.c_feet[f][k]).abs();
        }
    }
    Ok((-cfg.scales.feet_position * err).exp())
}

pub fn r_arm(obs: &Observation, cfg: &RewardConfig) -> Result<f64> {
    if obs.arm_pos.len() != cfg.c_arm.len() {
        return Err(invalid(format!(
            "arm posture has {} joints, config has {}",
            obs.arm_pos.len(),
            cfg.c_arm.len()
        )));
    }
    let sq: f64 = obs
        .arm_pos
        .iter()
        .zip(&cfg.c_arm)
        .map(|(a, c)| (a - c) * (a - c))
        .sum();
    if !sq.is_finite() {
        return Err(invalid("arm posture is not finite"));
    }
    Ok((-cfg.scales.arm * sq.sqrt()).exp())
}

pub fn r_base_accel(obs: &Observation, cfg: &RewardConfig) -> Result<f64> {
    finite3(&obs.base_acc, "base acceleration")?;
    let s: f64 = obs.base_acc.iter().map(|b| b.abs()).sum();
    Ok((-cfg.scales.base_accel * s).exp())
}

pub fn r_action_diff(obs: &Observation, cfg: &RewardConfig) -> Result<f64> {
    if obs.action.len() != obs.prev_action.len() {
        return Err(invalid("action and previous action differ in length"));
    }
    let s: f64 = obs
        .action
        .iter()
        .zip(&obs.prev_action)
        .map(|(a, b)| (a - b).abs())
        .sum();
    if !s.is_finite() {
        return Err(invalid("action is not finite"));
    }
    Ok((-cfg.scales.action_diff * s).exp())
}

pub fn r_torque(obs: &Observation, cfg: &RewardConfig) -> Result<f64> {
    let n = obs.applied_torque.len();
    if n == 0 || n != cfg.t_max.len() {
        return Err(invalid(format!(
            "torque term needs {} actuators, observation has {n}",
            cfg.t_max.len()
        )));
    }
    let s: f64 = obs
        .applied_torque
        .iter()
        .zip(&cfg.t_max)
        .map(|(t, m)| t.abs() / m)
        .sum();
    if !s.is_finite() {
        return Err(invalid("torque is not finite"));
    }
    Ok((-cfg.scales.torque * s / n as f64).exp())
}
