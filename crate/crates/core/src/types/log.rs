use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::command::Command;
use super::observation::Observation;
use crate::error::{Error, Result};
use crate::rewards::RewardBreakdown;

pub const LOG_SCHEMA_VERSION: u32 = 1;

/// Horizontal axis of an external push, in the robot's heading frame at push time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PushAxis {
    #[default]
    X,
    Y,
}

/// Constant horizontal force applied to the torso for a fixed duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Push {
    /// Signed force along `axis`, N.
    pub force: f64,
    /// s, > 0.
    pub duration: f64,
    pub start_time: f64,
    /// Attachment height above the base along the torso axis, m.
    pub height: f64,
    #[serde(default)]
    pub axis: PushAxis,
}

impl Push {
    pub fn impulse(&self) -> f64 {
        self.force.abs() * self.duration
    }
}

pub fn all_channels() -> Vec<String> {
    [
        "motor_pos",
        "motor_vel",
        "torso_orientation",
        "base_pos",
        "base_linvel",
        "foot_pos",
        "contact",
        "applied_torque",
        "action",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// First line of a JSON-lines episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    /// Control period, s.
    pub dt: f64,
    pub model_hash: String,
    pub config_hash: String,
    /// Observation channels carried by the records. Imported logs declare
    /// what they measured; simulator logs carry everything.
    #[serde(default = "all_channels")]
    pub channels: Vec<String>,
    /// Episode seed, when the log came from the simulator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Push the trial was scheduled to receive. Identifies the disturbance cell
    /// even when the robot fell before the push was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planned_push: Option<Push>,
}

impl LogHeader {
    pub fn new(dt: f64, model_hash: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Self {
            schema_version: LOG_SCHEMA_VERSION,
            dt,
            model_hash: model_hash.into(),
            config_hash: config_hash.into(),
            channels: all_channels(),
            seed: None,
            planned_push: None,
        }
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.channels.iter().any(|c| c == name)
    }
}

/// One control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub time: f64,
    pub observation: Observation,
    pub command: Command,
    #[serde(default)]
    pub rewards: RewardBreakdown,
    /// Push that started on this step, if any.
    #[serde(default)]
    pub push: Option<Push>,
    #[serde(default)]
    pub push_active: bool,
    #[serde(default)]
    pub fallen: bool,
    #[serde(default)]
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

impl EpisodeLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.header.dt
    }

    pub fn duration(&self) -> f64 {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    pub fn fell(&self) -> bool {
        self.records.iter().any(|r| r.fallen)
    }

    /// Structural checks: constant spacing, a single terminal record at the end,
    /// and a fall flag that never clears.
    pub fn validate(&self) -> Result<()> {
        if self.header.schema_version != LOG_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "log schema version {} (expected {LOG_SCHEMA_VERSION})",
                self.header.schema_version
            )));
        }
        if !(self.header.dt > 0.0) {
            return Err(Error::Schema(format!(
                "log dt {} must be positive",
                self.header.dt
            )));
        }
        let tol = 1e-9 * self.header.dt.max(1.0);
        for w in self.records.windows(2) {
            let gap = w[1].time - w[0].time;
            if (gap - self.header.dt).abs() > tol.max(1e-9 * w[1].time.abs()) {
                return Err(Error::Schema(format!(
                    "record spacing {gap} at t={} differs from dt {}",
                    w[1].time, self.header.dt
                )));
            }
            if w[0].fallen && !w[1].fallen {
                return Err(Error::Schema(format!(
                    "fall flag cleared at t={}",
                    w[1].time
                )));
            }
        }
        let terminals = self.records.iter().filter(|r| r.terminal).count();
        if !self.records.is_empty()
            && (terminals != 1 || !self.records.last().is_some_and(|r| r.terminal))
        {
            return Err(Error::Schema(format!(
                "expected exactly one terminal record at the end, found {terminals}"
            )));
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header_line = loop {
            match lines.next() {
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
                None => return Err(Error::Schema("empty episode log".into())),
            }
        };
        let header: LogHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::Schema(format!("bad log header: {e}")))?;
        if header.schema_version != LOG_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "log schema version {} (expected {LOG_SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        let mut records = Vec::new();
        for (i, l) in lines.enumerate() {
            let l = l?;
            if l.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&l)
                .map_err(|e| Error::Schema(format!("bad log record on line {}: {e}", i + 2)))?;
            records.push(rec);
        }
        Ok(Self { header, records })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }
}
