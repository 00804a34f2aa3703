//! Benchmark metrics, trial protocols and report emission.

mod disturbance;
mod metrics;
mod report;

pub use disturbance::{
    disturbance_trial, run_cell, run_disturbance_sweep, run_sweep, score_disturbance_logs,
    trial_log_name, Cell, Direction, DisturbanceGrid, NamedLogs, TrialOutcome, TrialProtocol,
    TrialRecord, TrialResult, REFERENCE_FORCES, REFERENCE_WEIGHT,
};
pub use metrics::{
    energy_metric, rotation_metrics, velocity_metric, EnergyResult, RotationRow, RotationTrial,
    Stat, VelocityResult, DEFAULT_CIRCLE_RADIUS, MIN_ENERGY_DISTANCE, STOP_SPEED,
};
pub use report::{
    emit_report, BenchReport, DirectionGrid, LabeledEnergy, LabeledVelocity, ReportFormat,
    ReportMetadata, REPORT_SCHEMA_VERSION,
};

use crate::error::{invalid, Result};
use crate::policy::Controller;
use crate::sim::{rollout_with, Env};
use crate::types::{Command, EpisodeLog};

/// Standing time before and after the walking command in a velocity trial, s.
pub const VELOCITY_SETTLE: f64 = 2.0;
pub const VELOCITY_STOP_WINDOW: f64 = 3.0;

/// Stand, walk at `v` for `duration`, then stand again until the stop window ends.
/// The log feeds both the velocity and the energy metric.
pub fn velocity_trial<C: Controller + ?Sized>(
    env: &mut Env,
    controller: &mut C,
    v: f64,
    duration: f64,
    seed: u64,
) -> Result<EpisodeLog> {
    if !(v.is_finite() && duration > 0.0) {
        return Err(invalid(
            "velocity trial needs a finite speed and positive duration",
        ));
    }
    let dt = env.control_dt();
    let walk_from = (VELOCITY_SETTLE / dt).round() as u32;
    let walk_to = walk_from + (duration / dt).round() as u32;
    let horizon = walk_to + (VELOCITY_STOP_WINDOW / dt).round() as u32;
    if env.config().episode_steps() < horizon {
        return Err(invalid(format!(
            "episode length {} s is shorter than the {} s velocity trial",
            env.config().episode_length,
            horizon as f64 * dt
        )));
    }
    env.set_random_pushes(false);
    env.set_fixed_command(Some(Command::standing()));
    rollout_with(env, controller, horizon, seed, |step, env| {
        if step == walk_from {
            env.set_fixed_command(Some(Command::new(v, 0.0, 0.0)));
        } else if step == walk_to {
            env.set_fixed_command(Some(Command::standing()));
        }
        Ok(None)
    })
}
