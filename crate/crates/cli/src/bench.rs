use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use rand_chacha::ChaCha8Rng;
use saw_core::bench::{
    emit_report, energy_metric, rotation_metrics, run_disturbance_sweep, score_disturbance_logs,
    velocity_metric, velocity_trial, BenchReport, Direction, DirectionGrid, LabeledEnergy,
    LabeledVelocity, ReportFormat, ReportMetadata, RotationRow, VELOCITY_SETTLE,
    VELOCITY_STOP_WINDOW,
};
use saw_core::config::ExperimentConfig;
use saw_core::policy::{ActorCritic, Checkpoint, PolicyController};
use saw_core::sim::model_hash;
use saw_core::EpisodeLog;

use crate::{write_resolved, ConfigArgs};

type Policy = PolicyController<ChaCha8Rng>;

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Push-recovery success grid.
    Disturbance(DisturbanceArgs),
    /// In-place rotation: angular error and foot drift.
    Rotation(RotationArgs),
    /// Mean velocity of a start-walk-stop trial.
    Velocity(WalkArgs),
    /// Positive mechanical work per metre.
    Energy(WalkArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Policy checkpoint to run in simulation.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Score existing episode logs (files or directories of .jsonl) instead of simulating.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub logs: Vec<PathBuf>,
    /// Keep the simulated episode logs under <out>/logs.
    #[arg(long)]
    pub save_logs: bool,
    /// Per-command form of the global flag.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Args)]
pub struct DisturbanceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Forces and durations as "F1,F2,...:D1,D2,..." (N and s).
    #[arg(long)]
    pub grid: Option<String>,
    /// Comma-separated push directions (+x,-x,+y,-y).
    #[arg(long, value_delimiter = ',')]
    pub directions: Option<Vec<String>>,
    #[arg(long)]
    pub trials: Option<u32>,
}

#[derive(Debug, Args)]
pub struct RotationArgs {
    #[command(flatten)]
    pub common: Common,
    /// Commanded yaw rate, rad/s.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Comma-separated trial durations, s.
    #[arg(long, value_delimiter = ',')]
    pub durations: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[command(flatten)]
    pub common: Common,
    /// Commanded forward speed, m/s.
    #[arg(long)]
    pub v: Option<f64>,
    /// Walking duration, s.
    #[arg(long)]
    pub t: Option<f64>,
}

struct Setup {
    cfg: ExperimentConfig,
    out: PathBuf,
    policy: Option<(Policy, String)>,
    logs: Vec<(String, EpisodeLog)>,
    serial: bool,
}

impl Setup {
    fn new(c: &Common, name: &str, serial: bool) -> anyhow::Result<Self> {
        let fallback = c.policy.as_deref().and_then(Path::parent);
        let cfg = c.cfg.load(fallback)?;
        let logs = load_logs(&c.logs)?;
        let policy = match (&c.policy, logs.is_empty()) {
            (Some(p), _) => Some(load_policy(p, &cfg)?),
            (None, true) => bail!(saw_core::Error::Config("pass --policy or --logs".into())),
            (None, false) => None,
        };
        let out = c.cfg.out_dir(&cfg, &format!("bench-{name}"));
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            cfg,
            out,
            policy,
            logs,
            serial: serial || c.serial,
        })
    }

    fn simulated(&self) -> bool {
        self.logs.is_empty()
    }

    fn metadata(&self) -> ReportMetadata {
        ReportMetadata {
            generator: format!("saw {}", env!("CARGO_PKG_VERSION")),
            policy_hash: self.policy.as_ref().map(|p| p.1.clone()),
            config_hash: Some(self.cfg.hash()),
            model_hash: Some(model_hash(&self.cfg.model)),
            seed: self.simulated().then_some(self.cfg.seed),
            sources: if self.simulated() {
                vec!["sim".into()]
            } else {
                self.logs.iter().map(|l| l.0.clone()).collect()
            },
        }
    }

    fn save_log(&self, name: &str, log: &EpisodeLog) -> anyhow::Result<()> {
        let path = self.out.join("logs").join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        log.save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    fn finish(&self, report: &BenchReport) -> anyhow::Result<()> {
        write_resolved(&self.cfg, &self.out)?;
        for p in emit_report(
            report,
            &self.out,
            &[ReportFormat::Json, ReportFormat::Csv, ReportFormat::Svg],
        )? {
            println!("wrote {}", p.display());
        }
        Ok(())
    }
}

fn load_policy(path: &Path, cfg: &ExperimentConfig) -> anyhow::Result<(Policy, String)> {
    let ck =
        Checkpoint::load(path).with_context(|| format!("loading policy {}", path.display()))?;
    if ck.config_hash != cfg.hash() {
        eprintln!(
            "note: policy was trained under a different config ({})",
            &ck.config_hash[..12.min(ck.config_hash.len())]
        );
    }
    let hash = ck.hash();
    let net = ActorCritic::from_checkpoint(&ck)?;
    Ok((PolicyController::new(net, None), hash))
}

fn collect_jsonl(path: &Path, out: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for e in entries {
            if e.is_dir() || e.extension().is_some_and(|x| x == "jsonl") {
                collect_jsonl(&e, out)?;
            }
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

fn load_logs(paths: &[PathBuf]) -> anyhow::Result<Vec<(String, EpisodeLog)>> {
    let mut files = Vec::new();
    for p in paths {
        collect_jsonl(p, &mut files)?;
    }
    if !paths.is_empty() && files.is_empty() {
        bail!(saw_core::Error::Config(format!(
            "no .jsonl logs under {paths:?}"
        )));
    }
    files
        .iter()
        .map(|f| {
            let log =
                EpisodeLog::load(f).with_context(|| format!("reading log {}", f.display()))?;
            log.validate()
                .with_context(|| format!("log {}", f.display()))?;
            let name = f.file_name().map_or_else(
                || f.display().to_string(),
                |n| n.to_string_lossy().into_owned(),
            );
            Ok((name, log))
        })
        .collect()
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|e| saw_core::Error::Config(format!("bad number {x:?}: {e}")).into())
        })
        .collect()
}

fn parse_grid(s: &str) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let Some((f, d)) = s.split_once(':') else {
        bail!(saw_core::Error::Config(format!(
            "grid {s:?} should look like \"F1,F2:D1,D2\""
        )));
    };
    Ok((parse_list(f)?, parse_list(d)?))
}

pub fn run(cmd: BenchCommand, serial: bool) -> anyhow::Result<()> {
    match cmd {
        BenchCommand::Disturbance(a) => disturbance(a, serial),
        BenchCommand::Rotation(a) => rotation(a, serial),
        BenchCommand::Velocity(a) => walk(a, serial, false),
        BenchCommand::Energy(a) => walk(a, serial, true),
    }
}

fn disturbance(a: DisturbanceArgs, serial: bool) -> anyhow::Result<()> {
    let mut s = Setup::new(&a.common, "disturbance", serial)?;
    let grid = &mut s.cfg.bench.grid;
    if let Some(g) = &a.grid {
        (grid.forces, grid.durations) = parse_grid(g)?;
    }
    if let Some(ds) = &a.directions {
        grid.directions = ds
            .iter()
            .map(|d| d.parse::<Direction>())
            .collect::<Result<_, _>>()?;
    }
    if let Some(n) = a.trials {
        grid.trials = n;
    }
    s.cfg.validate()?;
    let grid = s.cfg.bench.grid.clone();

    let results = if let Some((policy, _)) = &s.policy {
        let protocol = s.cfg.bench.protocol.clone();
        let seconds = protocol.horizon(&grid);
        let cfg = &s.cfg;
        let (results, logs) = run_disturbance_sweep(
            || cfg.bench_env(seconds),
            policy,
            &grid,
            &protocol,
            cfg.seed,
            a.common.save_logs,
            s.serial,
        )?;
        for (name, log) in &logs {
            s.save_log(name, log)?;
        }
        results
    } else {
        score_disturbance_logs(&s.logs, grid.trials, grid.stop_on_first_failure)?
    };
    for r in &results {
        println!(
            "{:>3} {:>6.1} N {:>4.2} s: {}/{} ({:.1}%)",
            r.direction, r.force, r.duration, r.successes, r.attempts, r.success_pct
        );
    }
    let mut report = BenchReport::new(s.metadata());
    report.disturbance = DirectionGrid::group(&results);
    s.finish(&report)
}

/// Seconds of non-zero yaw command in a log.
fn yaw_span(log: &EpisodeLog) -> (f64, Option<f64>) {
    let turning: Vec<f64> = log
        .records
        .iter()
        .map(|r| r.command.c_yaw)
        .filter(|w| *w != 0.0)
        .collect();
    (turning.len() as f64 * log.dt(), turning.first().copied())
}

fn rotation(a: RotationArgs, serial: bool) -> anyhow::Result<()> {
    let mut s = Setup::new(&a.common, "rotation", serial)?;
    if let Some(w) = a.omega {
        s.cfg.bench.rotation_omega = w;
    }
    if let Some(d) = a.durations {
        s.cfg.bench.rotation_durations = d;
    }
    s.cfg.validate()?;
    let b = &s.cfg.bench;
    let mut rows: Vec<RotationRow> = Vec::new();
    if s.simulated() {
        eprintln!("warning: the planar simulator has no yaw degree of freedom; rotation rows are left without trials");
        rows = b
            .rotation_durations
            .iter()
            .map(|&d| RotationRow::new(b.rotation_omega, d, vec![]))
            .collect();
    } else {
        let mut groups: Vec<(f64, f64, Vec<_>)> = b
            .rotation_durations
            .iter()
            .map(|&d| (b.rotation_omega, d, Vec::new()))
            .collect();
        for (name, log) in &s.logs {
            let (span, omega) = yaw_span(log);
            let omega = omega.unwrap_or(b.rotation_omega);
            let tol = 0.05 * span.max(1.0);
            let idx = match groups
                .iter()
                .position(|g| g.0 == omega && (g.1 - span).abs() <= tol)
            {
                Some(i) => i,
                None => {
                    eprintln!("{name}: {span:.2} s of yaw command matches no configured duration; scored on its own");
                    groups.push((omega, span, Vec::new()));
                    groups.len() - 1
                }
            };
            let duration = groups[idx].1;
            let t = rotation_metrics(log, omega, duration, b.circle_radius)
                .with_context(|| name.clone())?;
            groups[idx].2.push(t);
        }
        for (omega, d, trials) in groups {
            rows.push(RotationRow::new(omega, d, trials));
        }
    }
    for r in &rows {
        let fmt = |x: Option<saw_core::bench::Stat>| {
            x.map_or("n/a".to_string(), |s| {
                format!("{:.4} +- {:.4}", s.mean, s.std)
            })
        };
        println!(
            "omega {:.2} rad/s, {:>5.1} s: angular error {} rad, lateral drift {} m ({} trials)",
            r.omega,
            r.duration,
            fmt(r.angular_error),
            fmt(r.lateral_drift),
            r.trials.len()
        );
    }
    let mut report = BenchReport::new(s.metadata());
    report.rotation = rows;
    s.finish(&report)
}

fn walk(a: WalkArgs, serial: bool, energy: bool) -> anyhow::Result<()> {
    let name = if energy { "energy" } else { "velocity" };
    let mut s = Setup::new(&a.common, name, serial)?;
    if let Some(v) = a.v {
        s.cfg.bench.velocity = v;
    }
    if let Some(t) = a.t {
        s.cfg.bench.velocity_duration = t;
    }
    s.cfg.validate()?;
    let (v, t) = (s.cfg.bench.velocity, s.cfg.bench.velocity_duration);

    let logs: Vec<(String, EpisodeLog)> = match &s.policy {
        Some((policy, _)) => {
            let mut env = s
                .cfg
                .bench_env(VELOCITY_SETTLE + t + VELOCITY_STOP_WINDOW)?;
            let mut ctrl = policy.clone();
            let log = velocity_trial(&mut env, &mut ctrl, v, t, s.cfg.seed)?;
            if a.common.save_logs {
                s.save_log(&format!("{name}.jsonl"), &log)?;
            }
            vec![("sim".into(), log)]
        }
        None => std::mem::take(&mut s.logs),
    };

    let mut report = BenchReport::new(s.metadata());
    for (label, log) in &logs {
        if energy {
            let r = energy_metric(log).with_context(|| label.clone())?;
            match r.energy_per_meter {
                Some(e) => println!(
                    "{label}: {e:.2} J/m ({:.1} J over {:.3} m)",
                    r.positive_work, r.distance
                ),
                None => println!(
                    "{label}: n/a ({:.1} J over {:.3} m)",
                    r.positive_work, r.distance
                ),
            }
            report.energy.push(LabeledEnergy {
                label: label.clone(),
                result: r,
            });
        } else {
            let r = velocity_metric(log, v, t).with_context(|| label.clone())?;
            println!(
                "{label}: mean velocity {:.3} m/s over {:.2} s (commanded {v} m/s, {:.2} m of {:.2} m)",
                r.mean_velocity,
                r.stop_time - r.start_time,
                r.d_r,
                r.d_c
            );
            report.velocity.push(LabeledVelocity {
                label: label.clone(),
                result: r,
            });
        }
    }
    s.finish(&report)
}
