mod bench;
mod report;
mod train;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use saw_core::config::{ExperimentConfig, Preset};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

/// Standing-and-walking lab: train, validate, benchmark and report.
#[derive(Debug, Parser)]
#[command(name = "saw", version)]
struct Cli {
    /// Run rollouts and sweeps on one thread.
    #[arg(long, global = true)]
    serial: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy with PPO and the mirror loss.
    Train(train::TrainArgs),
    /// Run a benchmark metric and write a report.
    #[command(subcommand)]
    Bench(bench::BenchCommand),
    /// Re-emit a report in other formats.
    Report(report::ReportArgs),
    /// Run physics, gradient and reward checks.
    #[command(subcommand)]
    Validate(validate::ValidateCommand),
}

/// Config selection shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML file merged over the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// single-contact, single-contact-plus-plus, balance-smoke or walking-smoke.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: $SAW_OUT_DIR/<command>, else runs/<command>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Error raised when a check ran but failed.
#[derive(Debug)]
pub struct ValidationFailed(pub String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

impl ConfigArgs {
    /// Resolve the config. `fallback_dir` is searched for a resolved config when
    /// neither a file nor a preset was given.
    pub fn load(&self, fallback_dir: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
        let preset = self
            .preset
            .as_deref()
            .map(str::parse::<Preset>)
            .transpose()?;
        let mut path = self.config.clone();
        if path.is_none() && preset.is_none() {
            if let Some(dir) = fallback_dir {
                path = [dir.to_path_buf(), dir.join("..")]
                    .iter()
                    .map(|d| d.join(saw_core::config::RESOLVED_CONFIG_FILE))
                    .find(|p| p.is_file());
                if let Some(p) = &path {
                    eprintln!("using config {}", p.display());
                }
            }
        }
        let mut cfg = ExperimentConfig::load(path.as_deref(), preset)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.validate()?;
        }
        Ok(cfg)
    }

    pub fn out_dir(&self, cfg: &ExperimentConfig, command: &str) -> PathBuf {
        if let Some(o) = &self.out {
            return o.clone();
        }
        if let Some(o) = &cfg.out_dir {
            return o.clone();
        }
        let root = std::env::var_os("SAW_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(command)
    }
}

pub fn write_resolved(cfg: &ExperimentConfig, dir: &Path) -> anyhow::Result<()> {
    cfg.write_resolved(dir)
        .with_context(|| format!("writing resolved config into {}", dir.display()))?;
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ValidationFailed>().is_some() {
        return EXIT_VALIDATION;
    }
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<saw_core::Error>() {
            return match err {
                saw_core::Error::Config(_) | saw_core::Error::InvalidArgument(_) => EXIT_CONFIG,
                _ => EXIT_RUNTIME,
            };
        }
    }
    EXIT_RUNTIME
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.serial {
        // keep rayon from spawning extra workers in helper code paths too
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global();
    }
    let result = match cli.command {
        Command::Train(a) => train::run(a, cli.serial),
        Command::Bench(c) => bench::run(c, cli.serial),
        Command::Report(a) => report::run(a),
        Command::Validate(c) => validate::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
