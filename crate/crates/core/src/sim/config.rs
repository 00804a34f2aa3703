use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    /// Normal spring per contact point, N/m.
    pub stiffness: f64,
    /// Normal damper per contact point, N·s/m.
    pub damping: f64,
    /// Tangential stick spring, N/m.
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
    /// Coulomb coefficient.
    pub friction: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 1.0e5,
            damping: 1.0e3,
            tangential_stiffness: 1.0e5,
            tangential_damping: 1.0e3,
            friction: 1.0,
        }
    }
}

/// A fall is a base lower than `min_height_fraction` of nominal or a torso pitch beyond `max_pitch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FallParams {
    pub min_height_fraction: f64,
    /// rad
    pub max_pitch: f64,
}

impl Default for FallParams {
    fn default() -> Self {
        Self {
            min_height_fraction: 0.6,
            max_pitch: 1.0,
        }
    }
}

/// Random push process, sampled once per control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PushConfig {
    pub probability: f64,
    /// Force magnitude range, N; the sign is drawn separately.
    pub force: [f64; 2],
    /// Duration range, s.
    pub duration: [f64; 2],
}

impl Default for PushConfig {
    fn default() -> Self {
        Self::single_contact()
    }
}

impl PushConfig {
    /// 200-800 N for one 20 ms control step.
    pub fn single_contact() -> Self {
        Self {
            probability: 0.01,
            force: [200.0, 800.0],
            duration: [0.02, 0.02],
        }
    }

    /// 20-200 N for 200-500 ms.
    pub fn single_contact_plus_plus() -> Self {
        Self {
            probability: 0.01,
            force: [20.0, 200.0],
            duration: [0.2, 0.5],
        }
    }

    pub fn disabled() -> Self {
        Self {
            probability: 0.0,
            ..Self::single_contact()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandCategory {
    Standing,
    Sagittal,
    Lateral,
    RotateInPlace,
    Omnidirectional,
}

impl CommandCategory {
    pub const ALL: [CommandCategory; 5] = [
        CommandCategory::Standing,
        CommandCategory::Sagittal,
        CommandCategory::Lateral,
        CommandCategory::RotateInPlace,
        CommandCategory::Omnidirectional,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandRanges {
    pub c_x: [f64; 2],
    pub c_y: [f64; 2],
    pub c_yaw: [f64; 2],
}

impl Default for CommandRanges {
    fn default() -> Self {
        Self {
            c_x: [-0.5, 2.0],
            c_y: [-0.5, 0.5],
            c_yaw: [-0.5, 0.5],
        }
    }
}

/// Per-episode physical parameter perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainRandomization {
    pub mass_scale: [f64; 2],
    pub friction_scale: [f64; 2],
    pub gain_scale: [f64; 2],
    /// Std of additive Gaussian noise on every policy feature.
    pub obs_noise_std: f64,
    /// Inclusive range of whole control steps of action latency.
    pub action_delay: [u32; 2],
}

impl Default for DomainRandomization {
    fn default() -> Self {
        Self {
            mass_scale: [0.9, 1.1],
            friction_scale: [0.6, 1.2],
            gain_scale: [0.9, 1.1],
            obs_noise_std: 0.01,
            action_delay: [0, 1],
        }
    }
}

impl DomainRandomization {
    pub fn none() -> Self {
        Self {
            mass_scale: [1.0, 1.0],
            friction_scale: [1.0, 1.0],
            gain_scale: [1.0, 1.0],
            obs_noise_std: 0.0,
            action_delay: [0, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// s
    pub physics_dt: f64,
    /// Physics substeps per policy step.
    pub control_decimation: u32,
    /// m/s²
    pub gravity: f64,
    pub contact: ContactParams,
    pub fall: FallParams,
    /// s
    pub episode_length: f64,
    /// Inclusive range of control steps a command stays active.
    pub command_window: [u32; 2],
    pub push: PushConfig,
    pub commands: CommandRanges,
    pub categories: Vec<CommandCategory>,
    pub randomization: DomainRandomization,
    /// Std of the joint-angle perturbation applied at reset, rad.
    pub init_joint_noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            physics_dt: 1.0 / 2000.0,
            control_decimation: 40,
            gravity: 9.81,
            contact: ContactParams::default(),
            fall: FallParams::default(),
            episode_length: 16.0,
            command_window: [100, 300],
            push: PushConfig::default(),
            commands: CommandRanges::default(),
            categories: vec![CommandCategory::Standing, CommandCategory::Sagittal],
            randomization: DomainRandomization::default(),
            init_joint_noise: 0.02,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(invalid(format!(
            "{name} range {r:?} is empty or not finite"
        )));
    }
    Ok(())
}

impl SimConfig {
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.control_decimation as f64
    }

    /// Control steps in a full-length episode.
    pub fn episode_steps(&self) -> u32 {
        (self.episode_length / self.control_dt()).round() as u32
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.physics_dt > 0.0) || self.control_decimation == 0 {
            return Err(invalid(
                "physics_dt and control_decimation must be positive",
            ));
        }
        if !(self.gravity >= 0.0) {
            return Err(invalid("gravity must be non-negative"));
        }
        let c = &self.contact;
        if !(c.stiffness > 0.0
            && c.damping >= 0.0
            && c.tangential_stiffness > 0.0
            && c.tangential_damping >= 0.0
            && c.friction >= 0.0)
        {
            return Err(invalid("contact parameters must be positive"));
        }
        if !(self.fall.min_height_fraction > 0.0 && self.fall.max_pitch > 0.0) {
            return Err(invalid("fall thresholds must be positive"));
        }
        if !(self.episode_length > 0.0) {
            return Err(invalid("episode length must be positive"));
        }
        if self.command_window[0] == 0 || self.command_window[0] > self.command_window[1] {
            return Err(invalid(
                "command window must be a non-empty range of positive steps",
            ));
        }
        if !(0.0..=1.0).contains(&self.push.probability) {
            return Err(invalid("push probability must lie in [0, 1]"));
        }
        check_range("push force", self.push.force)?;
        check_range("push duration", self.push.duration)?;
        if self.push.force[0] < 0.0 || !(self.push.duration[0] > 0.0) {
            return Err(invalid(
                "push force must be non-negative and duration positive",
            ));
        }
        check_range("c_x", self.commands.c_x)?;
        check_range("c_y", self.commands.c_y)?;
        check_range("c_yaw", self.commands.c_yaw)?;
        if self.categories.is_empty() {
            return Err(invalid("command category set is empty"));
        }
        let dr = &self.randomization;
        for (name, r) in [
            ("mass_scale", dr.mass_scale),
            ("friction_scale", dr.friction_scale),
            ("gain_scale", dr.gain_scale),
        ] {
            check_range(name, r)?;
            if !(r[0] <= 1.0 && r[1] >= 1.0 && r[0] > 0.0) {
                return Err(invalid(format!("{name} range must contain 1.0")));
            }
        }
        if !(dr.obs_noise_std >= 0.0)
            || dr.action_delay[0] > dr.action_delay[1]
            || dr.action_delay[1] > 1
        {
            return Err(invalid("bad observation noise or action delay"));
        }
        if !(self.init_joint_noise >= 0.0) {
            return Err(invalid("init joint noise must be non-negative"));
        }
        Ok(())
    }
}
