//! Fixtures shared by the benchmarks.

use saw_core::{Command, EpisodeLog, LogHeader, LogRecord, Observation, UnitQuaternion};

/// Synthetic log of `n` records at spacing `dt`; `f` fills each record.
pub fn synthetic_log(
    dt: f64,
    n: usize,
    mut f: impl FnMut(f64, &mut Observation, &mut Command),
) -> EpisodeLog {
    let mut log = EpisodeLog::new(LogHeader::new(dt, "bench", "bench"));
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

/// Stand 2 s, walk at `v` for `walk` s, stand 3 s; six motors doing steady work.
pub fn walking_log(dt: f64, v: f64, walk: f64) -> EpisodeLog {
    let n = ((5.0 + walk) / dt).round() as usize + 1;
    synthetic_log(dt, n, |t, o, c| {
        let moving = (2.0..2.0 + walk).contains(&t);
        let x = v * (t - 2.0).clamp(0.0, walk);
        o.base_pos = [x, 0.0, 0.9];
        o.motor_vel = vec![if moving { 2.0 } else { 0.0 }; 6];
        o.applied_torque = vec![10.0; 6];
        if moving {
            *c = Command::new(v, 0.0, 0.0);
        }
    })
}

/// In-place turn at `omega` for `seconds`, feet at `radius` from the base.
pub fn rotation_log(dt: f64, omega: f64, seconds: f64, radius: f64) -> EpisodeLog {
    let n = (seconds / dt).round() as usize + 1;
    synthetic_log(dt, n, |t, o, c| {
        o.torso_orientation = UnitQuaternion::from_yaw(omega * t);
        o.foot_pos = [[0.0, radius, 0.0], [0.0, -radius, 0.0]];
        *c = Command::new(0.0, 0.0, omega);
    })
}
