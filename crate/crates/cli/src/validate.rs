use clap::{Args, Subcommand};
use saw_core::train::gradient_check;
use saw_core::validation::{all_passed, drop_test, free_fall, push_test, reward_audit, Check};

use crate::{ConfigArgs, ValidationFailed};

#[derive(Debug, Subcommand)]
pub enum ValidateCommand {
    /// Free fall and passive drops: ballistic motion, no energy gain.
    DropTest(Common),
    /// Impulse-momentum for pushes spanning both training distributions.
    PushTest(Common),
    /// PPO + mirror loss gradient against central differences.
    Gradcheck(GradArgs),
    /// Fuzzed reward bound and left/right invariance.
    RewardAudit(AuditArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct GradArgs {
    #[arg(long, default_value_t = 17)]
    pub seed: u64,
    /// Hidden sizes of the two LSTM layers.
    #[arg(long, default_value = "8,8", value_delimiter = ',')]
    pub hidden: Vec<usize>,
    /// Sequence length per chunk.
    #[arg(long, default_value_t = 6)]
    pub steps: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

fn report(checks: &[Check]) -> anyhow::Result<()> {
    for c in checks {
        println!(
            "{} {}: {:.6e} (bound {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.bound
        );
    }
    if all_passed(checks) {
        Ok(())
    } else {
        let n = checks.iter().filter(|c| !c.passed).count();
        Err(ValidationFailed(format!("{n} check(s) failed")).into())
    }
}

pub fn run(cmd: ValidateCommand) -> anyhow::Result<()> {
    match cmd {
        ValidateCommand::DropTest(a) => {
            let cfg = a.cfg.load(None)?;
            let mut checks = vec![free_fall(&cfg.model, &cfg.sim, 0.1)?];
            checks.extend(drop_test(&cfg.model, &cfg.sim)?);
            report(&checks)
        }
        ValidateCommand::PushTest(a) => {
            let cfg = a.cfg.load(None)?;
            report(&push_test(&cfg.model, &cfg.sim)?)
        }
        ValidateCommand::Gradcheck(a) => {
            let r = gradient_check(a.seed, &a.hidden, a.steps, a.h)?;
            println!(
                "checked {} parameters, loss {:.6}, worst parameter {}",
                r.parameters, r.loss, r.worst_parameter
            );
            report(&[Check {
                name: "max relative gradient error".into(),
                measured: r.max_relative_error,
                bound: "< 1e-4".into(),
                passed: r.max_relative_error < 1e-4,
            }])
        }
        ValidateCommand::RewardAudit(a) => {
            let cfg = a.cfg.load(None)?;
            report(&reward_audit(&cfg.model, &cfg.reward, a.samples, cfg.seed)?)
        }
    }
}
