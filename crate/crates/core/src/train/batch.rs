use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::PpoConfig;
use super::gae::{compute_gae, normalize_advantages};
use crate::error::Result;
use crate::policy::{lstm, sample_action, ActorCritic, HiddenState};
use crate::sim::Env;
use crate::types::{derive_seed, MirrorSpec};

/// A truncated-BPTT segment of one episode with the recurrent states at its start.
#[derive(Debug, Clone)]
pub struct Chunk {
    /// Normalized policy inputs.
    pub x: Vec<Vec<f64>>,
    /// Normalized mirrored inputs.
    pub x_mirror: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    /// Value estimates in reward units.
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub h_policy: HiddenState,
    pub h_value: HiddenState,
    /// Policy state when fed the mirrored sequence from the episode start.
    pub h_mirror: HiddenState,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub steps: u32,
    pub seconds: f64,
    pub total_return: f64,
    pub fell: bool,
    /// Per-term reward sums over the episode, in [`crate::rewards::TERM_NAMES`] order.
    pub term_sums: [f64; 13],
}

/// One iteration's experience.
#[derive(Debug, Clone)]
pub struct RolloutBatch {
    pub chunks: Vec<Chunk>,
    /// Raw (noisy, unnormalized) features, for the normalizer update.
    pub raw_features: Vec<Vec<f64>>,
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBatch {
    pub fn steps(&self) -> usize {
        self.chunks.iter().map(Chunk::len).sum()
    }

    pub fn mean_episode_seconds(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.seconds))
    }

    pub fn mean_return(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.total_return))
    }

    /// Per-step mean of each reward term.
    pub fn term_means(&self) -> [f64; 13] {
        let steps: f64 = self.episodes.iter().map(|e| e.steps as f64).sum();
        let mut out = [0.0; 13];
        for e in &self.episodes {
            for (o, s) in out.iter_mut().zip(&e.term_sums) {
                *o += s;
            }
        }
        if steps > 0.0 {
            out.iter_mut().for_each(|o| *o /= steps);
        }
        out
    }

    /// Normalize advantages across the whole batch.
    pub fn normalize_advantages(&mut self) {
        let mut all: Vec<f64> = self
            .chunks
            .iter()
            .flat_map(|c| c.advantages.iter().copied())
            .collect();
        normalize_advantages(&mut all);
        let mut k = 0;
        for c in &mut self.chunks {
            for a in &mut c.advantages {
                *a = all[k];
                k += 1;
            }
        }
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

struct EpisodeData {
    chunks: Vec<Chunk>,
    raw: Vec<Vec<f64>>,
    summary: EpisodeSummary,
}

fn run_episode(
    env: &mut Env,
    ac: &ActorCritic,
    mirror: &MirrorSpec,
    cfg: &PpoConfig,
    episode_seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeData> {
    env.reset(episode_seed);
    let pl = &ac.policy.layout;
    let vl = &ac.value.layout;
    let mut hp = HiddenState::zeros(pl);
    let mut hv = HiddenState::zeros(vl);
    let mut hm = HiddenState::zeros(pl);
    let log_std = ac.policy.log_std();
    let use_mirror = cfg.mirror_weight > 0.0;

    let mut snaps = Vec::new();
    let (mut xs, mut xms, mut acts, mut lps, mut vals, mut rews, mut raw) = (
        Vec::new(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
        Vec::new(),
    );
    let mut term_sums = [0.0; 13];
    let mut steps = 0u32;
    let fell = loop {
        if steps as usize % cfg.sequence_length == 0 {
            snaps.push((hp.clone(), hv.clone(), hm.clone()));
        }
        let f = env.policy_features();
        let x = ac.normalizer.normalize(&f)?;
        let xm = ac.normalizer.normalize(&mirror.mirror_features(&f)?)?;
        let mean = lstm::step(pl, &ac.policy.params, &mut hp, &x)?;
        let v = ac.value_scale * lstm::step(vl, &ac.value.params, &mut hv, &x)?[0];
        if use_mirror {
            lstm::step(pl, &ac.policy.params, &mut hm, &xm)?;
        }
        let (a, lp) = sample_action(&mean, &log_std, rng);
        let r = env.control_step(&a)?;
        for (s, v) in term_sums.iter_mut().zip(r.breakdown.terms()) {
            *s += v;
        }
        raw.push(f);
        xs.push(x);
        xms.push(xm);
        acts.push(a);
        lps.push(lp);
        vals.push(v);
        rews.push(r.reward);
        steps += 1;
        if r.done {
            break r.fallen;
        }
    };
    let bootstrap = if fell {
        0.0
    } else {
        let f = env.policy_features();
        let x = ac.normalizer.normalize(&f)?;
        ac.value_scale * lstm::step(vl, &ac.value.params, &mut hv, &x)?[0]
    };
    let mut dones = vec![false; rews.len()];
    if fell {
        *dones.last_mut().expect("episodes have at least one step") = true;
    }
    let (adv, ret) = compute_gae(&rews, &vals, &dones, bootstrap, cfg.gamma, cfg.lambda)?;

    let l = cfg.sequence_length;
    let mut chunks = Vec::with_capacity(snaps.len());
    for (k, (h_policy, h_value, h_mirror)) in snaps.into_iter().enumerate() {
        let r = k * l..((k + 1) * l).min(xs.len());
        chunks.push(Chunk {
            x: xs[r.clone()].to_vec(),
            x_mirror: xms[r.clone()].to_vec(),
            actions: acts[r.clone()].to_vec(),
            log_probs: lps[r.clone()].to_vec(),
            values: vals[r.clone()].to_vec(),
            rewards: rews[r.clone()].to_vec(),
            advantages: adv[r.clone()].to_vec(),
            returns: ret[r].to_vec(),
            h_policy,
            h_value,
            h_mirror,
        });
    }
    let total_return = rews.iter().sum();
    Ok(EpisodeData {
        chunks,
        raw,
        summary: EpisodeSummary {
            steps,
            seconds: steps as f64 * env.control_dt(),
            total_return,
            fell,
            term_sums,
        },
    })
}

/// Collect whole episodes until each worker has at least its share of
/// `cfg.batch_steps`. Worker streams are seeded from `(seed, worker)`, so the
/// batch does not depend on thread scheduling; `serial` runs workers in order
/// on the calling thread.
pub fn collect(
    env: &Env,
    ac: &ActorCritic,
    mirror: &MirrorSpec,
    cfg: &PpoConfig,
    seed: u64,
    serial: bool,
) -> Result<RolloutBatch> {
    let share = cfg.batch_steps.div_ceil(cfg.workers);
    let work = |w: usize| -> Result<Vec<EpisodeData>> {
        let mut env = env.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, w as u64));
        let mut out = Vec::new();
        let mut steps = 0;
        while steps < share {
            let ep_seed: u64 = rng.random();
            let ep = run_episode(&mut env, ac, mirror, cfg, ep_seed, &mut rng)?;
            steps += ep.summary.steps as usize;
            out.push(ep);
        }
        Ok(out)
    };
    let per_worker: Vec<Result<Vec<EpisodeData>>> = if serial {
        (0..cfg.workers).map(work).collect()
    } else {
        (0..cfg.workers).into_par_iter().map(work).collect()
    };
    let mut batch = RolloutBatch {
        chunks: Vec::new(),
        raw_features: Vec::new(),
        episodes: Vec::new(),
    };
    for w in per_worker {
        for ep in w? {
            batch.chunks.extend(ep.chunks);
            batch.raw_features.extend(ep.raw);
            batch.episodes.push(ep.summary);
        }
    }
    Ok(batch)
}

/// Largest deviation between stored log-probabilities and a replay of the
/// stored sequences from their hidden snapshots.
pub fn replay_deviation(batch: &RolloutBatch, ac: &ActorCritic) -> Result<f64> {
    let log_std = ac.policy.log_std();
    let devs: Vec<Result<f64>> = batch
        .chunks
        .par_iter()
        .map(|c| {
            let tr = lstm::forward(&ac.policy.layout, &ac.policy.params, &c.h_policy, &c.x)?;
            Ok(tr
                .outputs
                .iter()
                .zip(&c.actions)
                .zip(&c.log_probs)
                .map(|((m, a), lp)| (crate::policy::gaussian_log_prob(a, m, &log_std) - lp).abs())
                .fold(0.0, f64::max))
        })
        .collect();
    let mut worst: f64 = 0.0;
    for d in devs {
        worst = worst.max(d?);
    }
    Ok(worst)
}
