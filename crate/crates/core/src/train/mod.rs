//! PPO with GAE, value and entropy terms and a mirror-symmetry loss, plus the
//! episodic training loop with evaluation, metrics CSV and checkpoints.

mod adam;
mod batch;
mod config;
mod gae;
mod gradcheck;
mod loss;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use adam::{clip_grad_norm, Adam};
pub use batch::{collect, replay_deviation, Chunk, EpisodeSummary, RolloutBatch};
pub use config::PpoConfig;
pub use gae::{compute_gae, normalize_advantages};
pub use gradcheck::{gradient_check, synthetic_chunks, GradCheckReport, GRADCHECK_FLOOR};
pub use loss::{mirror_loss, ppo_loss, LossDiagnostics, LossOutput};

use crate::error::{Error, Result};
use crate::policy::{ActorCritic, PolicyController};
use crate::rewards::TERM_NAMES;
use crate::sim::{rollout, Env};
use crate::types::{derive_seed, Command, MirrorSpec};

const EVAL_STREAM: u64 = 0xE7A1;
const REPLAY_TOLERANCE: f64 = 1e-6;

/// Deterministic-policy evaluation summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalStats {
    pub mean_episode_seconds: f64,
    pub mean_return: f64,
    /// Mean single-foot-contact reward per control step over the full episode
    /// budget (steps after a fall count as zero).
    pub single_contact_rate: f64,
    pub fall_fraction: f64,
}

/// Run `episodes` mean-action episodes with seeds derived from `seed`,
/// optionally under a fixed command.
pub fn evaluate(
    env: &Env,
    ac: &ActorCritic,
    episodes: u32,
    seed: u64,
    command: Option<Command>,
    serial: bool,
) -> Result<EvalStats> {
    let horizon = env.config().episode_steps();
    let run = |k: u32| -> Result<(f64, f64, f64, bool)> {
        let mut env = env.clone();
        env.set_fixed_command(command);
        let mut c: PolicyController<ChaCha8Rng> = PolicyController::new(ac.clone(), None);
        let log = rollout(&mut env, &mut c, horizon, derive_seed(seed, k as u64))?;
        let ret: f64 = log.records.iter().map(|r| r.rewards.total).sum();
        let contact: f64 = log.records.iter().map(|r| r.rewards.feet_contact).sum();
        Ok((
            log.records.len() as f64 * env.control_dt(),
            ret,
            contact / horizon as f64,
            log.fell(),
        ))
    };
    let results: Vec<Result<(f64, f64, f64, bool)>> = if serial {
        (0..episodes).map(run).collect()
    } else {
        (0..episodes).into_par_iter().map(run).collect()
    };
    let mut s = EvalStats {
        mean_episode_seconds: 0.0,
        mean_return: 0.0,
        single_contact_rate: 0.0,
        fall_fraction: 0.0,
    };
    for r in results {
        let (len, ret, rate, fell) = r?;
        s.mean_episode_seconds += len;
        s.mean_return += ret;
        s.single_contact_rate += rate;
        s.fall_fraction += if fell { 1.0 } else { 0.0 };
    }
    let n = episodes.max(1) as f64;
    s.mean_episode_seconds /= n;
    s.mean_return /= n;
    s.single_contact_rate /= n;
    s.fall_fraction /= n;
    Ok(s)
}

/// One row of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationMetrics {
    pub iteration: u32,
    pub env_steps: u64,
    pub mean_return: f64,
    pub mean_episode_seconds: f64,
    pub term_means: [f64; 13],
    pub diagnostics: LossDiagnostics,
    pub replay_deviation: f64,
    pub eval: Option<EvalStats>,
}

pub fn metrics_csv_header() -> String {
    let mut cols: Vec<String> = ["iteration", "env_steps", "mean_return", "mean_episode_s"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(TERM_NAMES.iter().map(|t| format!("r_{t}")));
    cols.extend(
        [
            "surrogate",
            "value_loss",
            "entropy",
            "clip_fraction",
            "kl",
            "mirror",
            "replay_dev",
            "eval_episode_s",
            "eval_return",
            "eval_single_contact",
            "eval_fall_fraction",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols.join(",")
}

impl IterationMetrics {
    pub fn csv_row(&self) -> String {
        let d = &self.diagnostics;
        let mut cols = vec![
            self.iteration.to_string(),
            self.env_steps.to_string(),
            self.mean_return.to_string(),
            self.mean_episode_seconds.to_string(),
        ];
        cols.extend(self.term_means.iter().map(|v| v.to_string()));
        cols.extend(
            [
                d.surrogate,
                d.value_loss,
                d.entropy,
                d.clip_fraction,
                d.kl,
                d.mirror,
                self.replay_deviation,
            ]
            .iter()
            .map(|v| v.to_string()),
        );
        match &self.eval {
            Some(e) => cols.extend(
                [
                    e.mean_episode_seconds,
                    e.mean_return,
                    e.single_contact_rate,
                    e.fall_fraction,
                ]
                .iter()
                .map(|v| v.to_string()),
            ),
            None => cols.extend(std::iter::repeat_n(String::new(), 4)),
        }
        cols.join(",")
    }
}

/// PPO learner state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub env: Env,
    pub ac: ActorCritic,
    pub cfg: PpoConfig,
    pub mirror: MirrorSpec,
    pub seed: u64,
    pub serial: bool,
    /// Command used for the walking evaluation column, if any.
    pub eval_command: Option<Command>,
    optimizer: Adam,
    iteration: u32,
    env_steps: u64,
}

impl Trainer {
    pub fn new(env: Env, ac: ActorCritic, cfg: PpoConfig, seed: u64, serial: bool) -> Result<Self> {
        cfg.validate()?;
        let mirror = env.model().mirror_spec();
        if ac.policy.layout.input != env.model().feature_dim()
            || ac.policy.layout.output != env.model().num_actuators()
        {
            return Err(Error::InvalidArgument(
                "policy dimensions do not match the robot model".into(),
            ));
        }
        let n = ac.policy.params.len() + ac.value.params.len();
        Ok(Self {
            env,
            ac,
            cfg,
            mirror,
            seed,
            serial,
            eval_command: None,
            optimizer: Adam::new(n),
            iteration: 0,
            env_steps: 0,
        })
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn evaluate(&self) -> Result<EvalStats> {
        evaluate(
            &self.env,
            &self.ac,
            self.cfg.eval_episodes,
            derive_seed(self.seed, EVAL_STREAM),
            self.eval_command,
            self.serial,
        )
    }

    /// Collect, estimate advantages, update for several epochs, then refresh the normalizer.
    pub fn iterate(&mut self) -> Result<IterationMetrics> {
        let it_seed = derive_seed(self.seed, self.iteration as u64);
        let mut batch = collect(
            &self.env,
            &self.ac,
            &self.mirror,
            &self.cfg,
            it_seed,
            self.serial,
        )?;
        let replay = replay_deviation(&batch, &self.ac)?;
        if replay > REPLAY_TOLERANCE {
            return Err(Error::Training(format!(
                "replayed log-probabilities deviate by {replay:e}"
            )));
        }
        batch.normalize_advantages();
        let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(it_seed, 1));
        let mut diag_sum = LossDiagnostics::default();
        let mut updates = 0.0;
        let np = self.ac.policy.params.len();
        for _ in 0..self.cfg.epochs {
            let mut idx: Vec<usize> = (0..batch.chunks.len()).collect();
            rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut order_rng);
            for mb in idx.chunks(self.cfg.minibatch_sequences) {
                let chunks: Vec<&Chunk> = mb.iter().map(|&i| &batch.chunks[i]).collect();
                let out = ppo_loss(&chunks, &self.ac, &self.mirror, &self.cfg)?;
                let mut g = out.policy_grad;
                g.extend_from_slice(&out.value_grad);
                clip_grad_norm(&mut g, self.cfg.max_grad_norm);
                let mut params = std::mem::take(&mut self.ac.policy.params);
                params.extend_from_slice(&self.ac.value.params);
                self.optimizer.step(&mut params, &g, self.cfg.learning_rate);
                self.ac.value.params = params.split_off(np);
                self.ac.policy.params = params;
                let d = out.diagnostics;
                diag_sum.surrogate += d.surrogate;
                diag_sum.value_loss += d.value_loss;
                diag_sum.entropy += d.entropy;
                diag_sum.mirror += d.mirror;
                diag_sum.clip_fraction += d.clip_fraction;
                diag_sum.kl += d.kl;
                diag_sum.steps += d.steps;
                updates += 1.0;
            }
        }
        let diagnostics = LossDiagnostics {
            surrogate: diag_sum.surrogate / updates,
            value_loss: diag_sum.value_loss / updates,
            entropy: diag_sum.entropy / updates,
            mirror: diag_sum.mirror / updates,
            clip_fraction: diag_sum.clip_fraction / updates,
            kl: diag_sum.kl / updates,
            steps: diag_sum.steps,
        };
        self.ac.normalizer.update(&batch.raw_features)?;
        self.env_steps += batch.steps() as u64;
        self.iteration += 1;
        let eval = if self.cfg.eval_every > 0 && self.iteration % self.cfg.eval_every == 0 {
            Some(self.evaluate()?)
        } else {
            None
        };
        Ok(IterationMetrics {
            iteration: self.iteration,
            env_steps: self.env_steps,
            mean_return: batch.mean_return(),
            mean_episode_seconds: batch.mean_episode_seconds(),
            term_means: batch.term_means(),
            diagnostics,
            replay_deviation: replay,
            eval,
        })
    }
}

/// What a finished training run produced.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<IterationMetrics>,
    pub initial_eval: EvalStats,
    pub final_eval: EvalStats,
    pub final_checkpoint: Option<PathBuf>,
    pub elapsed_s: f64,
}

/// Run the training loop. With `out_dir`, writes `metrics.csv` and checkpoints
/// (`checkpoints/iter_NNNNN.json`, `policy.json` for the final one).
pub fn train_loop(
    trainer: &mut Trainer,
    out_dir: Option<&Path>,
    config_hash: &str,
) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut csv = match out_dir {
        Some(d) => {
            std::fs::create_dir_all(d.join("checkpoints"))?;
            let mut f = std::io::BufWriter::new(std::fs::File::create(d.join("metrics.csv"))?);
            writeln!(f, "{}", metrics_csv_header())?;
            Some(f)
        }
        None => None,
    };
    let initial_eval = trainer.evaluate()?;
    let mut metrics = Vec::new();
    let mut last_eval = initial_eval;
    while trainer.iteration() < trainer.cfg.max_iterations {
        let m = trainer.iterate()?;
        if let Some(f) = csv.as_mut() {
            writeln!(f, "{}", m.csv_row())?;
            f.flush()?;
        }
        if let Some(d) = out_dir {
            let every = trainer.cfg.checkpoint_every;
            if every > 0 && m.iteration % every == 0 {
                let p = d
                    .join("checkpoints")
                    .join(format!("iter_{:05}.json", m.iteration));
                trainer
                    .ac
                    .to_checkpoint(config_hash, m.iteration as u64)
                    .save(&p)?;
            }
        }
        let cfg = &trainer.cfg;
        let reached = match m.eval {
            Some(e) => {
                last_eval = e;
                let targets = [
                    cfg.target_eval_seconds.map(|t| e.mean_episode_seconds >= t),
                    cfg.target_single_contact
                        .map(|t| e.single_contact_rate >= t),
                ];
                targets.iter().any(Option::is_some) && targets.iter().all(|t| t.unwrap_or(true))
            }
            None => false,
        };
        metrics.push(m);
        let out_of_time = trainer
            .cfg
            .time_budget_s
            .is_some_and(|b| start.elapsed().as_secs_f64() >= b);
        if reached || out_of_time {
            break;
        }
    }
    let final_eval = match metrics.last() {
        Some(m) if m.eval.is_some() => last_eval,
        _ => trainer.evaluate()?,
    };
    let final_checkpoint = match out_dir {
        Some(d) => {
            let p = d.join("policy.json");
            trainer
                .ac
                .to_checkpoint(config_hash, trainer.iteration() as u64)
                .save(&p)?;
            Some(p)
        }
        None => None,
    };
    Ok(TrainOutcome {
        metrics,
        initial_eval,
        final_eval,
        final_checkpoint,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}
