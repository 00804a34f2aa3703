use crate::types::{yaw_quat, Command, Observation};

/// Policy input: motor and joint state, torso orientation relative to the
/// heading target, then the command `[c_x, c_y, c_yaw]`.
pub fn features(obs: &Observation, cmd: &Command) -> Vec<f64> {
    let mut f = Vec::with_capacity(obs.motor_pos.len() * 2 + obs.joint_pos.len() * 2 + 7);
    f.extend_from_slice(&obs.motor_pos);
    f.extend_from_slice(&obs.motor_vel);
    f.extend_from_slice(&obs.joint_pos);
    f.extend_from_slice(&obs.joint_vel);
    let q = yaw_quat(cmd).conjugate().mul(&obs.torso_orientation);
    // keep the double cover on the w >= 0 hemisphere so the input is continuous near identity
    let q = if q.w < 0.0 { q.neg() } else { q };
    f.extend_from_slice(&[q.w, q.x, q.y, q.z]);
    f.extend_from_slice(&[cmd.c_x, cmd.c_y, cmd.c_yaw]);
    f
}
