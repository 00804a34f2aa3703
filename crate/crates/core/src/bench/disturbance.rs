use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::policy::Controller;
use crate::sim::{rollout_with, Env, RobotModel};
use crate::types::{derive_seed, Command, EpisodeLog, Push, PushAxis};

/// Force span of the reference hardware sweep, N.
pub const REFERENCE_FORCES: [f64; 2] = [79.0, 214.0];
/// Weight the reference span was chosen against: its upper end is about half of it, N.
pub const REFERENCE_WEIGHT: f64 = 428.0;

/// Horizontal push direction in the heading frame. `+x` is the direction the robot faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
}

impl Direction {
    pub fn axis(self) -> PushAxis {
        match self {
            Direction::PosX | Direction::NegX => PushAxis::X,
            Direction::PosY | Direction::NegY => PushAxis::Y,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::PosX | Direction::PosY => 1.0,
            Direction::NegX | Direction::NegY => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::PosX => "+x",
            Direction::NegX => "-x",
            Direction::PosY => "+y",
            Direction::NegY => "-y",
        }
    }

    pub fn of_push(p: &Push) -> Self {
        match (p.axis, p.force >= 0.0) {
            (PushAxis::X, true) => Direction::PosX,
            (PushAxis::X, false) => Direction::NegX,
            (PushAxis::Y, true) => Direction::PosY,
            (PushAxis::Y, false) => Direction::NegY,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+x" | "x" => Ok(Direction::PosX),
            "-x" => Ok(Direction::NegX),
            "+y" | "y" => Ok(Direction::PosY),
            "-y" => Ok(Direction::NegY),
            other => Err(invalid(format!(
                "unknown push direction {other:?} (expected +x, -x, +y or -y)"
            ))),
        }
    }
}

/// Force × duration sweep for the standing disturbance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceGrid {
    pub directions: Vec<Direction>,
    /// N, strictly increasing.
    pub forces: Vec<f64>,
    /// s, strictly increasing.
    pub durations: Vec<f64>,
    pub trials: u32,
    pub stop_on_first_failure: bool,
}

impl Default for DisturbanceGrid {
    fn default() -> Self {
        Self::scaled_for(&RobotModel::default())
    }
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl DisturbanceGrid {
    /// Four forces across the reference span scaled by model weight, three
    /// durations, five trials, stop on first failure.
    pub fn scaled_for(model: &RobotModel) -> Self {
        let scale = model.total_mass() * 9.81 / REFERENCE_WEIGHT;
        let [lo, hi] = REFERENCE_FORCES.map(|f| f * scale);
        let forces = (0..4)
            .map(|i| ((lo + (hi - lo) * i as f64 / 3.0) * 10.0).round() / 10.0)
            .collect();
        Self {
            directions: vec![Direction::PosX, Direction::NegX],
            forces,
            durations: vec![0.2, 0.3, 0.5],
            trials: 5,
            stop_on_first_failure: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.is_empty() || self.forces.is_empty() || self.durations.is_empty() {
            return Err(invalid(
                "disturbance grid needs at least one direction, force and duration",
            ));
        }
        if !strictly_increasing(&self.forces)
            || self.forces.iter().any(|f| !(f.is_finite() && *f > 0.0))
        {
            return Err(invalid(
                "grid forces must be positive and strictly increasing",
            ));
        }
        if !strictly_increasing(&self.durations)
            || self.durations.iter().any(|d| !(d.is_finite() && *d > 0.0))
        {
            return Err(invalid(
                "grid durations must be positive and strictly increasing",
            ));
        }
        let mut dirs = self.directions.clone();
        dirs.sort();
        dirs.dedup();
        if dirs.len() != self.directions.len() {
            return Err(invalid("grid directions must be distinct"));
        }
        if self.trials == 0 {
            return Err(invalid("grid needs at least one trial per cell"));
        }
        Ok(())
    }

    /// Cells in direction, force, duration order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out =
            Vec::with_capacity(self.directions.len() * self.forces.len() * self.durations.len());
        for &direction in &self.directions {
            for &force in &self.forces {
                for &duration in &self.durations {
                    out.push(Cell {
                        direction,
                        force,
                        duration,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub direction: Direction,
    /// N
    pub force: f64,
    /// s
    pub duration: f64,
}

impl Cell {
    /// N·s
    pub fn impulse(&self) -> f64 {
        self.force * self.duration
    }

    pub fn push(&self, height: f64) -> Push {
        Push {
            force: self.direction.sign() * self.force,
            duration: self.duration,
            start_time: 0.0,
            height,
            axis: self.direction.axis(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub recovered: bool,
    /// The simulator diverged; counted as a failure.
    #[serde(default)]
    pub blowup: bool,
}

impl TrialOutcome {
    /// A trial succeeds iff the robot never falls.
    pub fn from_log(log: &EpisodeLog) -> Self {
        Self {
            recovered: !log.fell(),
            blowup: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 1-based
    pub trial: u32,
    /// Unknown for imported logs.
    #[serde(default)]
    pub seed: Option<u64>,
    pub recovered: bool,
    #[serde(default)]
    pub blowup: bool,
    /// Episode log the outcome was scored from, relative to the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<String>,
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub direction: Direction,
    pub force: f64,
    pub duration: f64,
    /// N·s
    pub impulse: f64,
    /// Cell seed; absent when scored from logs.
    #[serde(default)]
    pub seed: Option<u64>,
    pub attempts: u32,
    pub successes: u32,
    pub success_pct: f64,
    pub trials: Vec<TrialRecord>,
}

impl TrialResult {
    pub fn cell(&self) -> Cell {
        Cell {
            direction: self.direction,
            force: self.force,
            duration: self.duration,
        }
    }
}

/// Run up to `trials` attempts on one cell. `trial(k, seed)` returns `None` when no
/// more data is available (imported logs), which ends the cell early.
pub fn run_cell<F>(
    cell: Cell,
    trials: u32,
    stop_on_first_failure: bool,
    cell_seed: u64,
    mut trial: F,
) -> Result<TrialResult>
where
    F: FnMut(u32, u64) -> Result<Option<(TrialOutcome, Option<String>)>>,
{
    let mut records = Vec::new();
    for k in 1..=trials {
        let seed = derive_seed(cell_seed, k as u64);
        let Some((outcome, log)) = trial(k, seed)? else {
            break;
        };
        records.push(TrialRecord {
            trial: k,
            seed: Some(seed),
            recovered: outcome.recovered,
            blowup: outcome.blowup,
            log,
        });
        if stop_on_first_failure && !outcome.recovered {
            break;
        }
    }
    let attempts = records.len() as u32;
    let successes = records.iter().filter(|r| r.recovered).count() as u32;
    let success_pct = if attempts == 0 {
        0.0
    } else {
        100.0 * successes as f64 / attempts as f64
    };
    Ok(TrialResult {
        direction: cell.direction,
        force: cell.force,
        duration: cell.duration,
        impulse: cell.impulse(),
        seed: Some(cell_seed),
        attempts,
        successes,
        success_pct,
        trials: records,
    })
}

/// Apply the grid protocol with an arbitrary trial function; cells run concurrently unless `serial`.
pub fn run_sweep<F>(
    grid: &DisturbanceGrid,
    seed: u64,
    serial: bool,
    trial: F,
) -> Result<Vec<TrialResult>>
where
    F: Fn(&Cell, u32, u64) -> Result<TrialOutcome> + Sync,
{
    grid.validate()?;
    let cells = grid.cells();
    let one = |(i, cell): (usize, &Cell)| {
        run_cell(
            *cell,
            grid.trials,
            grid.stop_on_first_failure,
            derive_seed(seed, i as u64),
            |k, s| trial(cell, k, s).map(|o| Some((o, None))),
        )
    };
    if serial {
        cells.iter().enumerate().map(one).collect()
    } else {
        cells.par_iter().enumerate().map(one).collect()
    }
}

/// Timing of a simulated disturbance trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialProtocol {
    /// Standing time before the push, s.
    pub settle: f64,
    /// Observation window after the push ends, s.
    pub recovery: f64,
}

impl Default for TrialProtocol {
    fn default() -> Self {
        Self {
            settle: 2.0,
            recovery: 10.0,
        }
    }
}

impl TrialProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.settle >= 0.0 && self.recovery > 0.0) {
            return Err(invalid(
                "settle time must be non-negative and recovery window positive",
            ));
        }
        Ok(())
    }

    /// Longest trial the grid can produce, s.
    pub fn horizon(&self, grid: &DisturbanceGrid) -> f64 {
        self.settle + grid.durations.last().copied().unwrap_or(0.0) + self.recovery
    }
}

/// One standing trial: settle under a standing command, push, watch for a fall.
pub fn disturbance_trial<C: Controller + ?Sized>(
    env: &mut Env,
    controller: &mut C,
    cell: &Cell,
    protocol: &TrialProtocol,
    seed: u64,
) -> Result<EpisodeLog> {
    let dt = env.control_dt();
    let settle_steps = (protocol.settle / dt).round() as u32;
    let horizon = settle_steps + ((cell.duration + protocol.recovery) / dt).ceil() as u32;
    if env.config().episode_steps() < horizon {
        return Err(invalid(format!(
            "episode length {} s is shorter than the {} s disturbance trial",
            env.config().episode_length,
            horizon as f64 * dt
        )));
    }
    env.set_random_pushes(false);
    env.set_fixed_command(Some(Command::standing()));
    let push = cell.push(env.model().push_height);
    let mut log = rollout_with(env, controller, horizon, seed, |step, env| {
        if step == settle_steps {
            env.apply_push(push)?;
            Ok(Some(Push {
                start_time: env.state().time,
                ..push
            }))
        } else {
            Ok(None)
        }
    })?;
    log.header.planned_push = Some(Push {
        start_time: settle_steps as f64 * dt,
        ..push
    });
    Ok(log)
}

/// Kept trial logs keyed by file name.
pub type NamedLogs = Vec<(String, EpisodeLog)>;

/// File name used when trial logs are kept.
pub fn trial_log_name(cell: &Cell, trial: u32) -> String {
    format!(
        "disturbance/{}_{}N_{}ms_t{trial}.jsonl",
        match cell.direction {
            Direction::PosX => "px",
            Direction::NegX => "nx",
            Direction::PosY => "py",
            Direction::NegY => "ny",
        },
        cell.force,
        (cell.duration * 1000.0).round()
    )
}

/// Live sweep: one fresh env from `make_env` and one controller clone per cell.
/// Kept logs are returned alongside the results, keyed by [`trial_log_name`].
pub fn run_disturbance_sweep<C, F>(
    make_env: F,
    controller: &C,
    grid: &DisturbanceGrid,
    protocol: &TrialProtocol,
    seed: u64,
    keep_logs: bool,
    serial: bool,
) -> Result<(Vec<TrialResult>, NamedLogs)>
where
    C: Controller + Clone + Send + Sync,
    F: Fn() -> Result<Env> + Sync,
{
    grid.validate()?;
    protocol.validate()?;
    let cells = grid.cells();
    let one = |(i, cell): (usize, &Cell)| -> Result<(TrialResult, NamedLogs)> {
        let mut env = make_env()?;
        let mut ctrl = controller.clone();
        let mut logs = Vec::new();
        let result = run_cell(
            *cell,
            grid.trials,
            grid.stop_on_first_failure,
            derive_seed(seed, i as u64),
            |k, s| match disturbance_trial(&mut env, &mut ctrl, cell, protocol, s) {
                Ok(log) => {
                    let outcome = TrialOutcome::from_log(&log);
                    let name = keep_logs.then(|| trial_log_name(cell, k));
                    if let Some(n) = &name {
                        logs.push((n.clone(), log));
                    }
                    Ok(Some((outcome, name)))
                }
                Err(Error::SimulationBlowup { .. }) => Ok(Some((
                    TrialOutcome {
                        recovered: false,
                        blowup: true,
                    },
                    None,
                ))),
                Err(e) => Err(e),
            },
        )?;
        Ok((result, logs))
    };
    let per_cell: Vec<_> = if serial {
        cells.iter().enumerate().map(one).collect::<Result<_>>()?
    } else {
        cells
            .par_iter()
            .enumerate()
            .map(one)
            .collect::<Result<_>>()?
    };
    let mut results = Vec::with_capacity(per_cell.len());
    let mut logs = Vec::new();
    for (r, l) in per_cell {
        results.push(r);
        logs.extend(l);
    }
    Ok((results, logs))
}

fn push_cell(p: &Push) -> Cell {
    Cell {
        direction: Direction::of_push(p),
        force: p.force.abs(),
        duration: p.duration,
    }
}

/// Cell of a trial log: its applied push, else the header's planned push (a fall
/// before the push still counts against the cell).
fn log_cell(log: &EpisodeLog) -> Result<Cell> {
    let mut pushes = log.records.iter().filter_map(|r| r.push);
    let applied = pushes.next();
    if pushes.next().is_some() {
        return Err(Error::Schema(
            "disturbance log has more than one push".into(),
        ));
    }
    let planned = log.header.planned_push.as_ref().map(push_cell);
    match (applied.as_ref().map(push_cell), planned) {
        (Some(a), Some(p)) if a != p => Err(Error::Schema(format!(
            "applied push {a:?} differs from planned {p:?}"
        ))),
        (Some(c), _) | (None, Some(c)) => Ok(c),
        (None, None) => Err(Error::Schema(
            "disturbance log has no push record and no planned push".into(),
        )),
    }
}

/// Score recorded trials (simulated or imported) with the same cell protocol.
/// Logs are grouped by their push and consumed in the given order.
pub fn score_disturbance_logs(
    logs: &[(String, EpisodeLog)],
    trials: u32,
    stop_on_first_failure: bool,
) -> Result<Vec<TrialResult>> {
    if trials == 0 {
        return Err(invalid("need at least one trial per cell"));
    }
    type Group<'a> = (Cell, Vec<&'a (String, EpisodeLog)>);
    let mut groups: BTreeMap<(Direction, u64, u64), Group> = BTreeMap::new();
    for entry in logs {
        let cell = log_cell(&entry.1)?;
        let key = (
            cell.direction,
            cell.force.to_bits(),
            cell.duration.to_bits(),
        );
        groups
            .entry(key)
            .or_insert_with(|| (cell, Vec::new()))
            .1
            .push(entry);
    }
    let mut cells: Vec<_> = groups.into_values().collect();
    cells.sort_by(|a, b| {
        (a.0.direction, a.0.force, a.0.duration)
            .partial_cmp(&(b.0.direction, b.0.force, b.0.duration))
            .expect("finite cell keys")
    });
    cells
        .into_iter()
        .map(|(cell, entries)| {
            let mut it = entries.into_iter();
            let mut seeds = Vec::new();
            let mut r = run_cell(cell, trials, stop_on_first_failure, 0, |_, _| {
                Ok(it.next().map(|(name, log)| {
                    seeds.push(log.header.seed);
                    (TrialOutcome::from_log(log), Some(name.clone()))
                }))
            })?;
            r.seed = None;
            for (t, s) in r.trials.iter_mut().zip(seeds) {
                t.seed = s;
            }
            Ok(r)
        })
        .collect()
}
