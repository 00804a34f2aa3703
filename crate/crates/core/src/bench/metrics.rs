use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::types::{wrap_angle, EpisodeLog};

/// Radius of the zero-error circle for in-place rotation: a 2 ft diameter, m.
pub const DEFAULT_CIRCLE_RADIUS: f64 = 0.3048;
/// Below this travel the energy-per-meter figure is not reported, m.
pub const MIN_ENERGY_DISTANCE: f64 = 0.1;
/// Horizontal base speed counted as stopped, m/s.
pub const STOP_SPEED: f64 = 0.05;

fn require(log: &EpisodeLog, channels: &[&str]) -> Result<()> {
    let missing: Vec<_> = channels
        .iter()
        .filter(|c| !log.header.has_channel(c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "log lacks required channels {missing:?}"
        )));
    }
    if log.records.is_empty() {
        return Err(Error::Protocol("log has no records".into()));
    }
    Ok(())
}

fn horizontal_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationTrial {
    /// rad/s
    pub omega: f64,
    /// s
    pub duration: f64,
    /// Commanded orientation change, rad.
    pub theta_c: f64,
    /// Unwrapped yaw change over the log, rad.
    pub rotation: f64,
    /// rad
    pub angular_error: f64,
    /// m
    pub lateral_drift: f64,
}

/// Angular error and lateral drift of an in-place rotation trial.
///
/// The circle is centred on the base position at the first record.
pub fn rotation_metrics(
    log: &EpisodeLog,
    omega: f64,
    duration: f64,
    radius: f64,
) -> Result<RotationTrial> {
    if !(omega.is_finite() && duration > 0.0 && radius >= 0.0) {
        return Err(invalid(
            "rotation needs a finite rate, positive duration and non-negative radius",
        ));
    }
    require(log, &["torso_orientation", "base_pos", "foot_pos"])?;
    let first = &log.records[0].observation;
    let center = first.base_pos;
    let mut prev_yaw = first.torso_orientation.yaw();
    let mut rotation = 0.0;
    let mut drift: f64 = 0.0;
    for r in &log.records {
        let obs = &r.observation;
        let yaw = obs.torso_orientation.yaw();
        rotation += wrap_angle(yaw - prev_yaw);
        prev_yaw = yaw;
        for foot in 0..2 {
            let d = horizontal_distance(obs.world_foot_pos(foot), center);
            drift = drift.max(d - radius);
        }
    }
    let theta_c = omega * duration;
    Ok(RotationTrial {
        omega,
        duration,
        theta_c,
        rotation,
        angular_error: (theta_c - rotation).abs(),
        lateral_drift: drift,
    })
}

/// Mean and sample standard deviation of a set of trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

/// One row of the rotation table: all trials at one commanded duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRow {
    pub omega: f64,
    pub duration: f64,
    pub theta_c: f64,
    /// Absent when no trial was scored.
    pub angular_error: Option<Stat>,
    pub lateral_drift: Option<Stat>,
    pub trials: Vec<RotationTrial>,
}

impl RotationRow {
    pub fn new(omega: f64, duration: f64, trials: Vec<RotationTrial>) -> Self {
        let err: Vec<f64> = trials.iter().map(|t| t.angular_error).collect();
        let drift: Vec<f64> = trials.iter().map(|t| t.lateral_drift).collect();
        Self {
            omega,
            duration,
            theta_c: omega * duration,
            angular_error: Stat::of(&err),
            lateral_drift: Stat::of(&drift),
            trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityResult {
    /// m/s
    pub v: f64,
    /// s
    pub duration: f64,
    /// Commanded distance, m.
    pub d_c: f64,
    /// Base displacement between clock start and stop, m.
    pub d_r: f64,
    /// d_r / duration, m/s.
    pub mean_velocity: f64,
    pub start_time: f64,
    pub stop_time: f64,
}

/// Velocity accuracy from a trial that starts standing, walks under a constant
/// command, then is commanded to stand again.
///
/// The clock starts at the last record before the first non-standing command (or
/// the first record if the log never stands). It stops at the first record at
/// least `duration` later that is commanded to stand and moving slower than
/// [`STOP_SPEED`], or at the last record.
pub fn velocity_metric(log: &EpisodeLog, v: f64, duration: f64) -> Result<VelocityResult> {
    if !(v.is_finite() && duration > 0.0) {
        return Err(invalid(
            "velocity needs a finite speed and positive duration",
        ));
    }
    require(log, &["base_pos"])?;
    let recs = &log.records;
    let start = recs
        .iter()
        .position(|r| !r.command.is_standing())
        .map_or(0, |i| i.saturating_sub(1));
    let t0 = recs[start].time;
    let last = recs.len() - 1;
    let span = recs[last].time - t0;
    if span + 1e-9 * duration.max(1.0) < duration {
        return Err(Error::Protocol(format!(
            "log covers {span} s after the clock starts, shorter than {duration} s"
        )));
    }
    let stop = (start + 1..=last)
        .find(|&i| {
            let r = &recs[i];
            let dt = r.time - recs[i - 1].time;
            let speed =
                horizontal_distance(r.observation.base_pos, recs[i - 1].observation.base_pos) / dt;
            r.time - t0 >= duration && r.command.is_standing() && speed < STOP_SPEED
        })
        .unwrap_or(last);
    let d_r = horizontal_distance(
        recs[stop].observation.base_pos,
        recs[start].observation.base_pos,
    );
    Ok(VelocityResult {
        v,
        duration,
        d_c: v * duration,
        d_r,
        mean_velocity: d_r / duration,
        start_time: t0,
        stop_time: recs[stop].time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    /// J
    pub positive_work: f64,
    /// Straight-line base displacement, m.
    pub distance: f64,
    /// s
    pub duration: f64,
    /// J/m; absent when the log barely moved.
    pub energy_per_meter: Option<f64>,
}

/// Positive actuator work: each record's torque and motor velocity act over the
/// interval ending at its timestamp.
pub fn energy_metric(log: &EpisodeLog) -> Result<EnergyResult> {
    require(log, &["applied_torque", "motor_vel", "base_pos"])?;
    let recs = &log.records;
    let mut work = 0.0;
    for w in recs.windows(2) {
        let o = &w[1].observation;
        if o.applied_torque.len() != o.motor_vel.len() {
            return Err(Error::Schema(format!(
                "record at t={} has {} torques but {} motor velocities",
                w[1].time,
                o.applied_torque.len(),
                o.motor_vel.len()
            )));
        }
        let power: f64 = o
            .applied_torque
            .iter()
            .zip(&o.motor_vel)
            .map(|(t, w)| (t * w).max(0.0))
            .sum();
        work += power * (w[1].time - w[0].time);
    }
    let first = &recs[0];
    let last = &recs[recs.len() - 1];
    let distance = horizontal_distance(last.observation.base_pos, first.observation.base_pos);
    Ok(EnergyResult {
        positive_work: work,
        distance,
        duration: last.time - first.time,
        energy_per_meter: (distance >= MIN_ENERGY_DISTANCE).then(|| work / distance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Command, LogHeader, LogRecord, Observation, UnitQuaternion};

    fn log_from(
        dt: f64,
        n: usize,
        mut f: impl FnMut(f64, &mut Observation, &mut Command),
    ) -> EpisodeLog {
        let mut log = EpisodeLog::new(LogHeader::new(dt, "m", "c"));
        for i in 0..n {
            let t = i as f64 * dt;
            let mut obs = Observation {
                time: t,
                ..Default::default()
            };
            let mut cmd = Command::standing();
            f(t, &mut obs, &mut cmd);
            log.records.push(LogRecord {
                time: t,
                observation: obs,
                command: cmd,
                rewards: Default::default(),
                push: None,
                push_active: false,
                fallen: false,
                terminal: i + 1 == n,
            });
        }
        log
    }

    fn spin(omega: f64, radius: f64) -> impl FnMut(f64, &mut Observation, &mut Command) {
        move |t, o, c| {
            o.torso_orientation = UnitQuaternion::from_yaw(omega * t);
            o.foot_pos = [[0.0, radius, 0.0], [0.0, -radius, 0.0]];
            *c = Command::new(0.0, 0.0, omega);
        }
    }

    #[test]
    fn exact_rotation_inside_circle_has_no_error() {
        let log = log_from(0.02, 1501, spin(0.5, 0.2));
        let r = rotation_metrics(&log, 0.5, 30.0, DEFAULT_CIRCLE_RADIUS).unwrap();
        assert!((r.rotation - 15.0).abs() < 1e-9);
        assert!(r.angular_error < 1e-9);
        assert_eq!(r.lateral_drift, 0.0);
    }

    #[test]
    fn under_rotation_error() {
        let rate = 14.5 / 30.0;
        let log = log_from(0.02, 1501, spin(rate, 0.1));
        let r = rotation_metrics(&log, 0.5, 30.0, DEFAULT_CIRCLE_RADIUS).unwrap();
        assert_eq!(r.theta_c, 15.0);
        assert!((r.angular_error - 0.5).abs() < 1e-9);
    }

    #[test]
    fn drift_is_distance_beyond_circle() {
        let log = log_from(0.02, 50, |t, o, _| {
            o.foot_pos = [[0.0, 0.1, 0.0], [if t > 0.5 { 0.5 } else { 0.0 }, 0.0, 0.0]];
        });
        let r = rotation_metrics(&log, 0.5, 1.0, DEFAULT_CIRCLE_RADIUS).unwrap();
        assert!((r.lateral_drift - 0.1952).abs() < 1e-12);
    }

    #[test]
    fn rotation_needs_channels() {
        let mut log = log_from(0.02, 10, spin(0.5, 0.1));
        log.header.channels.retain(|c| c != "foot_pos");
        assert!(matches!(
            rotation_metrics(&log, 0.5, 1.0, 0.3),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn rotation_stats() {
        let mk = |e: f64| RotationTrial {
            omega: 0.5,
            duration: 1.0,
            theta_c: 0.5,
            rotation: 0.5 - e,
            angular_error: e,
            lateral_drift: 2.0 * e,
        };
        let row = RotationRow::new(0.5, 1.0, vec![mk(0.1), mk(0.3)]);
        let s = row.angular_error.unwrap();
        assert!((s.mean - 0.2).abs() < 1e-15);
        assert!((s.std - 0.02f64.sqrt()).abs() < 1e-15);
        assert!(RotationRow::new(0.5, 5.0, vec![]).angular_error.is_none());
    }

    #[test]
    fn constant_walk_covers_commanded_distance() {
        let log = log_from(0.01, 1001, |t, o, c| {
            o.base_pos = [t, 0.0, 0.8];
            *c = Command::new(1.0, 0.0, 0.0);
        });
        let r = velocity_metric(&log, 1.0, 10.0).unwrap();
        assert_eq!(r.d_c, 10.0);
        assert!((r.d_r - 10.0).abs() < 1e-9);
        assert!((r.mean_velocity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn clock_runs_from_standing_start_to_full_stop() {
        // stand 1 s, walk at 1.13 m/s for 10 s, stand
        let log = log_from(0.01, 1401, |t, o, c| {
            let x = 1.13 * (t - 1.0).clamp(0.0, 10.0);
            o.base_pos = [x, 0.0, 0.8];
            if t > 1.0 + 1e-9 && t <= 11.0 + 1e-9 {
                *c = Command::new(1.0, 0.0, 0.0);
            }
        });
        let r = velocity_metric(&log, 1.0, 10.0).unwrap();
        assert!((r.start_time - 1.0).abs() < 1e-9);
        assert!((r.d_r - 11.3).abs() < 1e-9);
        assert!((r.mean_velocity - 1.13).abs() < 1e-10);
    }

    #[test]
    fn short_log_is_a_protocol_error() {
        let log = log_from(0.01, 100, |t, o, c| {
            o.base_pos = [t, 0.0, 0.8];
            *c = Command::new(1.0, 0.0, 0.0);
        });
        assert!(matches!(
            velocity_metric(&log, 1.0, 10.0),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn constant_power_energy() {
        let log = log_from(0.01, 1001, |t, o, _| {
            o.base_pos = [t, 0.0, 0.8];
            o.applied_torque = vec![5.0];
            o.motor_vel = vec![2.0];
        });
        let e = energy_metric(&log).unwrap();
        assert!((e.positive_work - 100.0).abs() < 1e-9);
        assert!((e.energy_per_meter.unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn braking_contributes_nothing() {
        let log = log_from(0.01, 201, |t, o, _| {
            o.base_pos = [0.5 * t, 0.0, 0.8];
            o.applied_torque = vec![5.0, -5.0];
            o.motor_vel = vec![1.0, 1.0];
        });
        let e = energy_metric(&log).unwrap();
        assert!((e.positive_work - 10.0).abs() < 1e-9);
        assert!((e.energy_per_meter.unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn standing_log_is_not_normalized() {
        let log = log_from(0.01, 101, |_, o, _| {
            o.applied_torque = vec![3.0];
            o.motor_vel = vec![1.0];
        });
        let e = energy_metric(&log).unwrap();
        assert!((e.positive_work - 3.0).abs() < 1e-9);
        assert_eq!(e.energy_per_meter, None);
    }

    #[test]
    fn energy_converges_under_dt_refinement() {
        let signal = |dt: f64| {
            let n = (10.0 / dt).round() as usize + 1;
            log_from(dt, n, |t, o, _| {
                o.base_pos = [t, 0.0, 0.8];
                o.applied_torque = vec![
                    2.0 + (std::f64::consts::TAU * 0.5 * t).sin(),
                    3.0 * (std::f64::consts::TAU * 0.3 * t).cos(),
                ];
                o.motor_vel = vec![1.5 + 0.5 * (std::f64::consts::TAU * 0.7 * t).cos(), 1.0];
            })
        };
        let coarse = energy_metric(&signal(0.02)).unwrap().positive_work;
        let fine = energy_metric(&signal(0.0005)).unwrap().positive_work;
        assert!(((coarse - fine) / fine).abs() < 0.005, "{coarse} vs {fine}");
    }
}
