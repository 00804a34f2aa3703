//! Shared domain types: commands, quaternions, observations, mirror maps and episode logs.

mod command;
mod log;
mod mirror;
mod observation;
mod quat;

pub use command::{yaw_quat, Command};
pub use log::{all_channels, EpisodeLog, LogHeader, LogRecord, Push, PushAxis, LOG_SCHEMA_VERSION};
pub use mirror::{IndexMirror, MirrorSpec};
pub use observation::{Observation, LEFT, RIGHT};
pub use quat::{qd, wrap_angle, UnitQuaternion};

/// Roll-pitch component of the torso orientation, heading removed.
pub fn rp_quat(obs: &Observation) -> UnitQuaternion {
    obs.torso_orientation.roll_pitch_part()
}

/// Hex SHA-256 of a byte string; used for config and model fingerprints.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Deterministic child seed for a numbered stream (SplitMix64 finaliser).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
