use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::batch::Chunk;
use super::config::PpoConfig;
use super::loss::ppo_loss;
use crate::error::Result;
use crate::policy::{gaussian_log_prob, lstm, ActorCritic, HiddenState, PolicyConfig};
use crate::sim::RobotModel;
use crate::types::MirrorSpec;

/// Relative errors below this absolute gradient scale are measured against it instead.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub parameters: usize,
    pub max_relative_error: f64,
    pub worst_parameter: usize,
    pub loss: f64,
}

fn random_hidden(layout: &crate::policy::LstmLayout, rng: &mut ChaCha8Rng) -> HiddenState {
    let mut h = HiddenState::zeros(layout);
    for v in h.h.iter_mut().chain(h.c.iter_mut()) {
        v.iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
    }
    h
}

/// Synthetic chunks whose stored log-probabilities sit close to the current
/// policy, keeping every ratio strictly inside the clip range.
pub fn synthetic_chunks(
    ac: &ActorCritic,
    mirror: &MirrorSpec,
    n_chunks: usize,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Chunk>> {
    let pl = &ac.policy.layout;
    let log_std = ac.policy.log_std();
    let mut out = Vec::with_capacity(n_chunks);
    for _ in 0..n_chunks {
        let x: Vec<Vec<f64>> = (0..len)
            .map(|_| (0..pl.input).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let x_mirror = x
            .iter()
            .map(|v| mirror.mirror_features(v))
            .collect::<Result<Vec<_>>>()?;
        let h_policy = random_hidden(pl, rng);
        let tr = lstm::forward(pl, &ac.policy.params, &h_policy, &x)?;
        let actions: Vec<Vec<f64>> = tr
            .outputs
            .iter()
            .map(|m| {
                m.iter()
                    .zip(&log_std)
                    .map(|(mu, ls)| mu + ls.exp() * rng.random_range(-1.5..1.5))
                    .collect()
            })
            .collect();
        let log_probs = actions
            .iter()
            .zip(&tr.outputs)
            .map(|(a, m)| gaussian_log_prob(a, m, &log_std) + rng.random_range(-0.05..0.05))
            .collect();
        out.push(Chunk {
            x_mirror,
            actions,
            log_probs,
            values: vec![0.0; len],
            rewards: vec![0.0; len],
            advantages: (0..len).map(|_| rng.random_range(-2.0..2.0)).collect(),
            returns: (0..len).map(|_| rng.random_range(-50.0..150.0)).collect(),
            h_value: random_hidden(&ac.value.layout, rng),
            h_mirror: random_hidden(pl, rng),
            h_policy,
            x,
        });
    }
    Ok(out)
}

fn param_mut(ac: &mut ActorCritic, np: usize, i: usize) -> &mut f64 {
    if i < np {
        &mut ac.policy.params[i]
    } else {
        &mut ac.value.params[i - np]
    }
}

/// Central finite differences of the full PPO + mirror loss against the analytic
/// gradient, over every policy and value parameter.
pub fn gradient_check(
    seed: u64,
    hidden: &[usize],
    steps: usize,
    h: f64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = RobotModel::without_arms();
    let pc = PolicyConfig {
        hidden: hidden.to_vec(),
        init_log_std: -0.7,
        head_gain: 1.0,
        ..Default::default()
    };
    let ac = ActorCritic::new(&model, &pc, &mut rng)?;
    let mirror = model.mirror_spec();
    let cfg = PpoConfig {
        entropy_coef: 0.01,
        ..Default::default()
    };
    let chunks = synthetic_chunks(&ac, &mirror, 2, steps, &mut rng)?;
    let refs: Vec<&Chunk> = chunks.iter().collect();
    let base = ppo_loss(&refs, &ac, &mirror, &cfg)?;
    let np = ac.policy.params.len();
    let analytic: Vec<f64> = base
        .policy_grad
        .iter()
        .chain(&base.value_grad)
        .copied()
        .collect();
    let mut worst = 0.0f64;
    let mut worst_i = 0;
    let mut probe = ac.clone();
    for (i, &an) in analytic.iter().enumerate() {
        let orig = *param_mut(&mut probe, np, i);
        *param_mut(&mut probe, np, i) = orig + h;
        let lp = ppo_loss(&refs, &probe, &mirror, &cfg)?.loss;
        *param_mut(&mut probe, np, i) = orig - h;
        let lm = ppo_loss(&refs, &probe, &mirror, &cfg)?.loss;
        *param_mut(&mut probe, np, i) = orig;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(GRADCHECK_FLOOR);
        if rel > worst {
            worst = rel;
            worst_i = i;
        }
    }
    Ok(GradCheckReport {
        parameters: analytic.len(),
        max_relative_error: worst,
        worst_parameter: worst_i,
        loss: base.loss,
    })
}
