//! Planar biped simulator, episodic command and push protocol, and rollouts.

mod config;
pub mod dynamics;
mod env;
mod model;
mod protocol;

pub use config::{
    CommandCategory, CommandRanges, ContactParams, DomainRandomization, FallParams, PushConfig,
    SimConfig,
};
pub use dynamics::{
    ContactForce, ContactKind, Dynamics, Energy, ExternalForce, PhysicsScales, SimState,
};
pub use env::{Env, StepResult};
pub use model::{ArmParams, FootParams, JointParams, LinkParams, RobotModel};
pub use protocol::{maybe_push, sample_command};

use crate::error::Result;
use crate::policy::Controller;
use crate::types::{sha256_hex, EpisodeLog, LogHeader, LogRecord, Push};

/// Model fingerprint stored in log headers.
pub fn model_hash(model: &RobotModel) -> String {
    sha256_hex(&serde_json::to_vec(model).expect("model serializes"))
}

/// Reset `env` with `seed` and run `controller` until the episode ends or
/// `horizon` control steps have elapsed.
pub fn rollout<C: Controller + ?Sized>(
    env: &mut Env,
    controller: &mut C,
    horizon: u32,
    seed: u64,
) -> Result<EpisodeLog> {
    rollout_with(env, controller, horizon, seed, |_, _| Ok(None))
}

/// Like [`rollout`], but `hook(step, env)` runs before every control step. A push
/// the hook returns is recorded on that step's log record.
pub fn rollout_with<C, H>(
    env: &mut Env,
    controller: &mut C,
    horizon: u32,
    seed: u64,
    mut hook: H,
) -> Result<EpisodeLog>
where
    C: Controller + ?Sized,
    H: FnMut(u32, &mut Env) -> Result<Option<Push>>,
{
    env.reset(seed);
    controller.reset();
    let header = LogHeader {
        seed: Some(seed),
        ..LogHeader::new(env.control_dt(), model_hash(env.model()), env.config_hash())
    };
    let mut log = EpisodeLog::new(header);
    for step in 0..horizon {
        let injected = hook(step, env)?;
        let feats = env.policy_features();
        let action = controller.act(env.observation(), &env.command(), &feats)?;
        let r = env.control_step(&action)?;
        log.records.push(LogRecord {
            time: r.observation.time,
            observation: r.observation,
            command: r.command,
            rewards: r.breakdown,
            push: r.push_started.or(injected),
            push_active: r.push_active,
            fallen: r.fallen,
            terminal: r.done,
        });
        if r.done {
            break;
        }
    }
    if let Some(last) = log.records.last_mut() {
        last.terminal = true;
    }
    Ok(log)
}
