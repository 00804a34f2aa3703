//! Experiment configuration: named presets, TOML overrides and the resolved
//! config written next to every run's outputs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bench::{DisturbanceGrid, TrialProtocol, DEFAULT_CIRCLE_RADIUS};
use crate::error::{Error, Result};
use crate::policy::PolicyConfig;
use crate::rewards::RewardConfig;
use crate::sim::{CommandCategory, Env, PushConfig, RobotModel, SimConfig};
use crate::train::PpoConfig;
use crate::types::{sha256_hex, Command};

/// File name of the resolved config written next to outputs.
pub const RESOLVED_CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 200-800 N, 20 ms pushes; command windows of 40-100 steps.
    SingleContact,
    /// 20-200 N, 200-500 ms pushes; command windows of 100-300 steps.
    SingleContactPlusPlus,
    /// Planar standing under 20-60 N pushes with a (16, 16) LSTM.
    BalanceSmoke,
    /// Standing and forward walking up to 1.5 m/s with a (32, 32) LSTM.
    WalkingSmoke,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::SingleContact,
        Preset::SingleContactPlusPlus,
        Preset::BalanceSmoke,
        Preset::WalkingSmoke,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SingleContact => "single-contact",
            Preset::SingleContactPlusPlus => "single-contact-plus-plus",
            Preset::BalanceSmoke => "balance-smoke",
            Preset::WalkingSmoke => "walking-smoke",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::Config(format!(
                    "unknown preset {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Benchmark protocol settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub grid: DisturbanceGrid,
    pub protocol: TrialProtocol,
    /// Commanded yaw rate for the rotation test, rad/s.
    pub rotation_omega: f64,
    /// Rotation trial durations, s.
    pub rotation_durations: Vec<f64>,
    /// m
    pub circle_radius: f64,
    /// Commanded speed for the velocity test, m/s.
    pub velocity: f64,
    /// s
    pub velocity_duration: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            grid: DisturbanceGrid::default(),
            protocol: TrialProtocol::default(),
            rotation_omega: 0.5,
            rotation_durations: vec![1.0, 5.0, 30.0],
            circle_radius: DEFAULT_CIRCLE_RADIUS,
            velocity: 1.0,
            velocity_duration: 10.0,
        }
    }
}

impl BenchConfig {
    pub fn for_model(model: &RobotModel) -> Self {
        Self {
            grid: DisturbanceGrid::scaled_for(model),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.protocol.validate()?;
        if !self.rotation_omega.is_finite() || self.rotation_durations.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config(
                "rotation rate must be finite and durations positive".into(),
            ));
        }
        if !(self.circle_radius >= 0.0)
            || !self.velocity.is_finite()
            || !(self.velocity_duration > 0.0)
        {
            return Err(Error::Config(
                "bad circle radius or velocity test settings".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Fixed command for periodic evaluation; `None` evaluates under the random protocol.
    #[serde(default)]
    pub eval_command: Option<Command>,
    pub model: RobotModel,
    pub sim: SimConfig,
    pub reward: RewardConfig,
    pub policy: PolicyConfig,
    pub ppo: PpoConfig,
    pub bench: BenchConfig,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let smoke_push = PushConfig {
            probability: 0.01,
            force: [20.0, 60.0],
            duration: [0.1, 0.2],
        };
        let (model, sim, policy, ppo, eval_command) = match preset {
            Preset::SingleContact => (
                RobotModel::default(),
                SimConfig {
                    push: PushConfig::single_contact(),
                    command_window: [40, 100],
                    ..SimConfig::default()
                },
                PolicyConfig::default(),
                PpoConfig::default(),
                None,
            ),
            Preset::SingleContactPlusPlus => (
                RobotModel::default(),
                SimConfig {
                    push: PushConfig::single_contact_plus_plus(),
                    command_window: [100, 300],
                    ..SimConfig::default()
                },
                PolicyConfig::default(),
                PpoConfig::default(),
                None,
            ),
            Preset::BalanceSmoke => (
                RobotModel::without_arms(),
                SimConfig {
                    categories: vec![CommandCategory::Standing],
                    push: smoke_push,
                    ..SimConfig::default()
                },
                PolicyConfig {
                    hidden: vec![16, 16],
                    ..PolicyConfig::default()
                },
                PpoConfig {
                    max_iterations: 400,
                    eval_every: 5,
                    checkpoint_every: 10,
                    target_eval_seconds: Some(12.5),
                    time_budget_s: Some(1800.0),
                    ..PpoConfig::default()
                },
                Some(Command::standing()),
            ),
            Preset::WalkingSmoke => {
                let mut sim = SimConfig {
                    categories: vec![CommandCategory::Standing, CommandCategory::Sagittal],
                    push: smoke_push,
                    ..SimConfig::default()
                };
                sim.commands.c_x = [0.0, 1.5];
                (
                    RobotModel::without_arms(),
                    sim,
                    PolicyConfig {
                        hidden: vec![32, 32],
                        ..PolicyConfig::default()
                    },
                    PpoConfig {
                        max_iterations: 2000,
                        eval_every: 10,
                        checkpoint_every: 50,
                        target_single_contact: Some(0.65),
                        time_budget_s: Some(7200.0),
                        ..PpoConfig::default()
                    },
                    Some(Command::new(1.0, 0.0, 0.0)),
                )
            }
        };
        let reward = Env::default_rewards(&model);
        let bench = BenchConfig::for_model(&model);
        Self {
            preset,
            seed: 1,
            out_dir: None,
            eval_command,
            model,
            sim,
            reward,
            policy,
            ppo,
            bench,
        }
    }

    /// Merge a TOML document over a preset. The preset is `preset_override`, else the
    /// document's `preset` key, else single-contact. When the document changes the
    /// model, reward targets and grid forces it leaves unset are re-derived from it.
    pub fn from_toml_str(text: &str, preset_override: Option<Preset>) -> Result<Self> {
        let mut user: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("config is not valid TOML: {e}")))?;
        let file_preset = match user.remove("preset") {
            Some(toml::Value::String(s)) => Some(s.parse::<Preset>()?),
            Some(other) => {
                return Err(Error::Config(format!(
                    "preset must be a string, got {other}"
                )))
            }
            None => None,
        };
        let preset = preset_override
            .or(file_preset)
            .unwrap_or(Preset::SingleContact);
        let base = Self::preset(preset);
        let mut merged = base.to_table()?;
        deep_merge(&mut merged, &user);
        let mut cfg: Self =
            toml::Value::Table(merged)
                .try_into()
                .map_err(|e: toml::de::Error| {
                    Error::Config(format!("invalid config: {}", e.message()))
                })?;
        if user.contains_key("model") {
            if !user.contains_key("reward") {
                cfg.reward = Env::default_rewards(&cfg.model);
            }
            let forces_set = user
                .get("bench")
                .and_then(|b| b.get("grid"))
                .is_some_and(|g| g.get("forces").is_some());
            if !forces_set {
                cfg.bench.grid.forces = DisturbanceGrid::scaled_for(&cfg.model).forces;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Preset plus the optional config file.
    pub fn load(path: Option<&Path>, preset_override: Option<Preset>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::from_toml_str(&text, preset_override)
            }
            None => {
                let cfg = Self::preset(preset_override.unwrap_or(Preset::SingleContact));
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    fn to_table(&self) -> Result<toml::Table> {
        let text = self.to_toml()?;
        text.parse()
            .map_err(|e| Error::Config(format!("config does not re-parse: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config does not serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!(
                "seed {} does not fit in a signed 64-bit integer",
                self.seed
            )));
        }
        self.model.validate()?;
        self.sim.validate()?;
        self.reward.validate()?;
        self.policy.validate()?;
        self.ppo.validate()?;
        self.bench.validate()?;
        if self.reward.t_max.len() != self.model.num_actuators()
            || self.reward.c_arm.len() != self.model.arm_actuators().len()
        {
            return Err(Error::Config(
                "reward torque limits or arm pose do not match the model".into(),
            ));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Training environment.
    pub fn build_env(&self) -> Result<Env> {
        Env::new(self.model.clone(), self.sim.clone(), self.reward.clone())
    }

    /// Environment for benchmark trials: no random pushes, episodes of at least `seconds`.
    pub fn bench_env(&self, seconds: f64) -> Result<Env> {
        let mut sim = self.sim.clone();
        sim.push = PushConfig::disabled();
        sim.episode_length = sim.episode_length.max(seconds + sim.control_dt());
        let mut env = Env::new(self.model.clone(), sim, self.reward.clone())?;
        env.set_random_pushes(false);
        Ok(env)
    }

    /// Write the resolved config into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let p = dir.join(RESOLVED_CONFIG_FILE);
        std::fs::write(&p, self.to_toml()?)?;
        Ok(p)
    }
}

fn deep_merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => deep_merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for p in Preset::ALL {
            let cfg = ExperimentConfig::preset(p);
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert!(
                text.contains(&format!("preset = \"{}\"", p.name())),
                "{text}"
            );
            let back = ExperimentConfig::from_toml_str(&text, None).unwrap();
            assert_eq!(back, cfg, "{p}");
        }
    }

    #[test]
    fn preset_values() {
        let sc = ExperimentConfig::preset(Preset::SingleContact);
        assert_eq!(sc.sim.push.force, [200.0, 800.0]);
        assert_eq!(sc.sim.push.duration, [0.02, 0.02]);
        assert_eq!(sc.sim.command_window, [40, 100]);
        let pp = ExperimentConfig::preset(Preset::SingleContactPlusPlus);
        assert_eq!(pp.sim.push.force, [20.0, 200.0]);
        assert_eq!(pp.sim.push.duration, [0.2, 0.5]);
        assert_eq!(pp.sim.command_window, [100, 300]);
        let bs = ExperimentConfig::preset(Preset::BalanceSmoke);
        assert_eq!(bs.policy.hidden, vec![16, 16]);
        assert_eq!(bs.sim.push.force, [20.0, 60.0]);
        assert_eq!(bs.sim.categories, vec![CommandCategory::Standing]);
    }

    #[test]
    fn overrides_merge_deeply() {
        let cfg = ExperimentConfig::from_toml_str(
            "preset = \"balance-smoke\"\nseed = 9\n[ppo]\nlearning_rate = 1e-3\n[sim.push]\nprobability = 0.02\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.preset, Preset::BalanceSmoke);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.ppo.learning_rate, 1e-3);
        assert_eq!(cfg.ppo.max_iterations, 400);
        assert_eq!(cfg.sim.push.probability, 0.02);
        assert_eq!(cfg.sim.push.force, [20.0, 60.0]);
    }

    #[test]
    fn flag_preset_wins_over_file() {
        let cfg = ExperimentConfig::from_toml_str(
            "preset = \"balance-smoke\"",
            Some(Preset::SingleContactPlusPlus),
        )
        .unwrap();
        assert_eq!(cfg.preset, Preset::SingleContactPlusPlus);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "bogus = 1",
            "[ppo]\nclipp = 0.3",
            "[sim.push]\nforcee = [1.0, 2.0]",
            "[bench.grid]\ntrial = 3",
        ] {
            let e = ExperimentConfig::from_toml_str(text, None).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{text}: {e}");
        }
        assert!(ExperimentConfig::from_toml_str("preset = \"nope\"", None).is_err());
    }

    #[test]
    fn model_change_rederives_targets() {
        let cfg =
            ExperimentConfig::from_toml_str("[model]\nnominal_height = 0.75\n", None).unwrap();
        assert_eq!(cfg.reward.c_h, 0.75);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(
            ExperimentConfig::from_toml_str("[bench.grid]\nforces = [100.0, 50.0]", None).is_err()
        );
        assert!(ExperimentConfig::from_toml_str("[ppo]\nclip = -1.0", None).is_err());
    }

    #[test]
    fn bench_env_is_long_enough_and_push_free() {
        let cfg = ExperimentConfig::preset(Preset::BalanceSmoke);
        let env = cfg.bench_env(40.0).unwrap();
        assert!(env.config().episode_steps() as f64 * env.control_dt() >= 40.0);
        assert_eq!(env.config().push.probability, 0.0);
    }
}
