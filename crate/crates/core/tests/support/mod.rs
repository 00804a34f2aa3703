#![allow(dead_code)]

pub mod reward_fixtures;

use saw_core::{Command, EpisodeLog, LogHeader, LogRecord, Observation};

/// Log of `n` records at spacing `dt`; `f` fills each record.
pub fn synthetic_log(
    dt: f64,
    n: usize,
    mut f: impl FnMut(f64, &mut Observation, &mut Command),
) -> EpisodeLog {
    let mut log = EpisodeLog::new(LogHeader::new(dt, "synthetic", "synthetic"));
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
