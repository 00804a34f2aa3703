use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use saw_core::derive_seed;
use saw_core::policy::ActorCritic;
use saw_core::train::{train_loop, Trainer};

use crate::{write_resolved, ConfigArgs};

/// Stream used to seed network initialisation.
const INIT_STREAM: u64 = 0x1417;

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Override the iteration cap.
    #[arg(long)]
    pub iterations: Option<u32>,
    /// Per-command form of the global flag.
    #[arg(long)]
    pub serial: bool,
}

pub fn run(args: TrainArgs, serial: bool) -> anyhow::Result<()> {
    let serial = serial || args.serial;
    let mut cfg = args.cfg.load(None)?;
    if let Some(n) = args.iterations {
        cfg.ppo.max_iterations = n;
        cfg.ppo.validate()?;
    }
    let out: PathBuf = args.cfg.out_dir(&cfg, "train");
    std::fs::create_dir_all(&out)?;
    write_resolved(&cfg, &out)?;

    let env = cfg.build_env()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, INIT_STREAM));
    let ac = ActorCritic::new(&cfg.model, &cfg.policy, &mut rng)?;
    let mut trainer = Trainer::new(env, ac, cfg.ppo.clone(), cfg.seed, serial)?;
    trainer.eval_command = cfg.eval_command;
    let outcome = train_loop(&mut trainer, Some(&out), &cfg.hash())?;

    let e0 = outcome.initial_eval;
    let e1 = outcome.final_eval;
    println!(
        "preset {} seed {} iterations {} ({:.1} s)",
        cfg.preset,
        cfg.seed,
        outcome.metrics.len(),
        outcome.elapsed_s
    );
    println!(
        "eval episode length {:.2} s -> {:.2} s, fall fraction {:.2} -> {:.2}, single contact {:.3} -> {:.3}",
        e0.mean_episode_seconds,
        e1.mean_episode_seconds,
        e0.fall_fraction,
        e1.fall_fraction,
        e0.single_contact_rate,
        e1.single_contact_rate
    );
    if let Some(p) = outcome.final_checkpoint {
        println!("policy {}", p.display());
    }
    println!("metrics {}", out.join("metrics.csv").display());
    Ok(())
}
