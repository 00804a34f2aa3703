use rayon::prelude::*;

use super::batch::Chunk;
use super::config::PpoConfig;
use crate::error::{Error, Result};
use crate::policy::{clamp_log_std, gaussian_entropy, gaussian_log_prob, lstm, ActorCritic};
use crate::types::MirrorSpec;

/// Scalar diagnostics of one loss evaluation (means over steps).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossDiagnostics {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Mean squared mirror discrepancy `|mu(M o) - M mu(o)|^2`.
    pub mirror: f64,
    /// Fraction of steps with `|ratio - 1| > clip`.
    pub clip_fraction: f64,
    /// k3 estimator of KL(old || new).
    pub kl: f64,
    pub steps: usize,
}

/// Total loss with gradients for the policy and value parameter vectors.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub policy_grad: Vec<f64>,
    pub value_grad: Vec<f64>,
    pub diagnostics: LossDiagnostics,
}

#[derive(Default)]
struct Sums {
    surrogate: f64,
    value: f64,
    entropy: f64,
    mirror: f64,
    clipped: f64,
    kl: f64,
}

fn chunk_loss(
    c: &Chunk,
    ac: &ActorCritic,
    mirror: &MirrorSpec,
    cfg: &PpoConfig,
    inv_n: f64,
) -> Result<(Sums, Vec<f64>, Vec<f64>)> {
    let pl = &ac.policy.layout;
    let vl = &ac.value.layout;
    let pp = &ac.policy.params;
    let raw_log_std: Vec<f64> = pl
        .log_std_range()
        .map(|r| pp[r].to_vec())
        .unwrap_or_default();
    let log_std: Vec<f64> = raw_log_std.iter().map(|&v| clamp_log_std(v)).collect();
    let free: Vec<bool> = raw_log_std.iter().map(|&v| v == clamp_log_std(v)).collect();
    let var: Vec<f64> = log_std.iter().map(|l| (2.0 * l).exp()).collect();
    let nout = pl.output;

    let mut gp = vec![0.0; pp.len()];
    let mut d_log_std = vec![0.0; nout];
    let mut s = Sums::default();

    let tr = lstm::forward(pl, pp, &c.h_policy, &c.x)?;
    let mut d_mean = vec![vec![0.0; nout]; c.len()];
    let entropy = gaussian_entropy(&log_std);
    for t in 0..c.len() {
        let mu = &tr.outputs[t];
        let a = &c.actions[t];
        let adv = c.advantages[t];
        let lp = gaussian_log_prob(a, mu, &raw_log_std);
        let log_ratio = lp - c.log_probs[t];
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        s.surrogate -= (ratio * adv).min(clipped * adv);
        // the unclipped branch is active on the closed side of the boundary
        let active = if adv >= 0.0 {
            ratio <= 1.0 + cfg.clip
        } else {
            ratio >= 1.0 - cfg.clip
        };
        if active {
            let g_lp = -adv * ratio * inv_n;
            for i in 0..nout {
                let diff = a[i] - mu[i];
                d_mean[t][i] += g_lp * diff / var[i];
                d_log_std[i] += g_lp * (diff * diff / var[i] - 1.0);
            }
        }
        if (ratio - 1.0).abs() > cfg.clip {
            s.clipped += 1.0;
        }
        s.kl += (ratio - 1.0) - log_ratio;
        s.entropy += entropy;
        for d in d_log_std.iter_mut() {
            *d -= cfg.entropy_coef * inv_n;
        }
    }

    if cfg.mirror_weight > 0.0 {
        let tm = lstm::forward(pl, pp, &c.h_mirror, &c.x_mirror)?;
        let mut d_mirror = vec![vec![0.0; nout]; c.len()];
        for t in 0..c.len() {
            let target = mirror.mirror_act(&tr.outputs[t])?;
            let diff: Vec<f64> = tm.outputs[t]
                .iter()
                .zip(&target)
                .map(|(a, b)| a - b)
                .collect();
            s.mirror += diff.iter().map(|d| d * d).sum::<f64>();
            let scale = 2.0 * cfg.mirror_weight * inv_n;
            for i in 0..nout {
                d_mirror[t][i] = scale * diff[i];
            }
            let back = mirror.act.apply_transpose(&d_mirror[t]);
            for i in 0..nout {
                d_mean[t][i] -= back[i];
            }
        }
        lstm::backward(pl, pp, &tm, &d_mirror, &mut gp)?;
    }
    lstm::backward(pl, pp, &tr, &d_mean, &mut gp)?;
    if let Some(r) = pl.log_std_range() {
        for (i, k) in r.enumerate() {
            if free[i] {
                gp[k] += d_log_std[i];
            }
        }
    }

    let pv = &ac.value.params;
    let mut gv = vec![0.0; pv.len()];
    let tv = lstm::forward(vl, pv, &c.h_value, &c.x)?;
    let mut d_v = vec![vec![0.0]; c.len()];
    for t in 0..c.len() {
        let err = tv.outputs[t][0] - c.returns[t] / ac.value_scale;
        s.value += err * err;
        d_v[t][0] = 2.0 * cfg.value_coef * err * inv_n;
    }
    lstm::backward(vl, pv, &tv, &d_v, &mut gv)?;
    Ok((s, gp, gv))
}

/// PPO clipped surrogate + value loss - entropy bonus + mirror loss, averaged
/// over every step of `chunks`. Chunks are evaluated in parallel and reduced in
/// order, so the result is independent of thread scheduling.
pub fn ppo_loss(
    chunks: &[&Chunk],
    ac: &ActorCritic,
    mirror: &MirrorSpec,
    cfg: &PpoConfig,
) -> Result<LossOutput> {
    let n: usize = chunks.iter().map(|c| c.len()).sum();
    if n == 0 {
        return Err(Error::Training("empty minibatch".into()));
    }
    let inv_n = 1.0 / n as f64;
    // per chunk: loss sums, policy gradient, value gradient
    let parts: Vec<Result<_>> = chunks
        .par_iter()
        .map(|c| chunk_loss(c, ac, mirror, cfg, inv_n))
        .collect();
    let mut gp = vec![0.0; ac.policy.params.len()];
    let mut gv = vec![0.0; ac.value.params.len()];
    let mut s = Sums::default();
    for part in parts {
        let (ps, pgp, pgv) = part?;
        s.surrogate += ps.surrogate;
        s.value += ps.value;
        s.entropy += ps.entropy;
        s.mirror += ps.mirror;
        s.clipped += ps.clipped;
        s.kl += ps.kl;
        for (a, b) in gp.iter_mut().zip(&pgp) {
            *a += b;
        }
        for (a, b) in gv.iter_mut().zip(&pgv) {
            *a += b;
        }
    }
    let d = LossDiagnostics {
        surrogate: s.surrogate * inv_n,
        value_loss: s.value * inv_n,
        entropy: s.entropy * inv_n,
        mirror: s.mirror * inv_n,
        clip_fraction: s.clipped * inv_n,
        kl: s.kl * inv_n,
        steps: n,
    };
    let loss = d.surrogate + cfg.value_coef * d.value_loss - cfg.entropy_coef * d.entropy
        + cfg.mirror_weight * d.mirror;
    if !loss.is_finite() || gp.iter().chain(&gv).any(|g| !g.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite loss or gradient: {d:?}"
        )));
    }
    Ok(LossOutput {
        loss,
        policy_grad: gp,
        value_grad: gv,
        diagnostics: d,
    })
}

/// Mean over steps of `|mu(M_o o) - M_a mu(o)|^2`, each sequence run from its stored
/// (mirrored) hidden state.
pub fn mirror_loss(chunks: &[&Chunk], ac: &ActorCritic, mirror: &MirrorSpec) -> Result<f64> {
    let pl = &ac.policy.layout;
    let pp = &ac.policy.params;
    let mut total = 0.0;
    let mut n = 0usize;
    for c in chunks {
        let tr = lstm::forward(pl, pp, &c.h_policy, &c.x)?;
        let tm = lstm::forward(pl, pp, &c.h_mirror, &c.x_mirror)?;
        for (a, b) in tr.outputs.iter().zip(&tm.outputs) {
            let ma = mirror.mirror_act(a)?;
            total += b
                .iter()
                .zip(&ma)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>();
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyConfig;
    use crate::sim::RobotModel;
    use crate::train::gradcheck::synthetic_chunks;
    use crate::train::gradient_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (ActorCritic, MirrorSpec, Vec<Chunk>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = RobotModel::without_arms();
        let pc = PolicyConfig {
            hidden: vec![8, 8],
            head_gain: 1.0,
            ..Default::default()
        };
        let ac = ActorCritic::new(&model, &pc, &mut rng).unwrap();
        let mirror = model.mirror_spec();
        let chunks = synthetic_chunks(&ac, &mirror, 3, 6, &mut rng).unwrap();
        (ac, mirror, chunks)
    }

    /// Reset stored log-probs to the current policy so every ratio is exactly 1.
    fn on_policy(ac: &ActorCritic, chunks: &mut [Chunk]) {
        let ls = ac.policy.log_std();
        for c in chunks {
            let tr =
                lstm::forward(&ac.policy.layout, &ac.policy.params, &c.h_policy, &c.x).unwrap();
            for t in 0..c.len() {
                c.log_probs[t] = gaussian_log_prob(&c.actions[t], &tr.outputs[t], &ls);
            }
        }
    }

    #[test]
    fn full_loss_gradient_matches_finite_differences() {
        let r = gradient_check(17, &[8, 8], 6, 1e-5).unwrap();
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }

    #[test]
    fn unchanged_policy_has_zero_surrogate_and_clip_fraction() {
        let (ac, mirror, mut chunks) = setup(1);
        on_policy(&ac, &mut chunks);
        let mut all: Vec<f64> = chunks.iter().flat_map(|c| c.advantages.clone()).collect();
        crate::train::normalize_advantages(&mut all);
        let mut k = 0;
        for c in &mut chunks {
            for a in &mut c.advantages {
                *a = all[k];
                k += 1;
            }
        }
        let refs: Vec<&Chunk> = chunks.iter().collect();
        let out = ppo_loss(&refs, &ac, &mirror, &PpoConfig::default()).unwrap();
        assert!(out.diagnostics.surrogate.abs() < 1e-12);
        assert_eq!(out.diagnostics.clip_fraction, 0.0);
        assert!(out.diagnostics.kl.abs() < 1e-15);
    }

    #[test]
    fn zero_clip_at_unit_ratio_gives_vanilla_policy_gradient() {
        let (ac, mirror, mut chunks) = setup(2);
        on_policy(&ac, &mut chunks);
        let refs: Vec<&Chunk> = chunks.iter().collect();
        let cfg = PpoConfig {
            clip: 0.0,
            value_coef: 0.0,
            mirror_weight: 0.0,
            ..Default::default()
        };
        let out = ppo_loss(&refs, &ac, &mirror, &cfg).unwrap();
        // vanilla objective -E[log pi * A] differentiated by central differences
        let n: usize = chunks.iter().map(|c| c.len()).sum();
        let vanilla = |ac: &ActorCritic| -> f64 {
            let ls: Vec<f64> = ac
                .policy
                .layout
                .log_std_range()
                .map(|r| ac.policy.params[r].to_vec())
                .unwrap();
            let mut s = 0.0;
            for c in &chunks {
                let tr =
                    lstm::forward(&ac.policy.layout, &ac.policy.params, &c.h_policy, &c.x).unwrap();
                for t in 0..c.len() {
                    s -= gaussian_log_prob(&c.actions[t], &tr.outputs[t], &ls) * c.advantages[t];
                }
            }
            s / n as f64
        };
        let h = 1e-6;
        for i in (0..ac.policy.params.len()).step_by(7) {
            let mut a = ac.clone();
            a.policy.params[i] += h;
            let mut b = ac.clone();
            b.policy.params[i] -= h;
            let fd = (vanilla(&a) - vanilla(&b)) / (2.0 * h);
            let an = out.policy_grad[i];
            assert!(
                (fd - an).abs() <= 1e-6 * fd.abs().max(1e-3),
                "param {i}: {fd} vs {an}"
            );
        }
    }

    #[test]
    fn flipping_advantages_negates_surrogate() {
        let (ac, mirror, chunks) = setup(3);
        let cfg = PpoConfig {
            clip: 10.0,
            ..Default::default()
        };
        let refs: Vec<&Chunk> = chunks.iter().collect();
        let a = ppo_loss(&refs, &ac, &mirror, &cfg)
            .unwrap()
            .diagnostics
            .surrogate;
        let flipped: Vec<Chunk> = chunks
            .iter()
            .map(|c| Chunk {
                advantages: c.advantages.iter().map(|v| -v).collect(),
                ..c.clone()
            })
            .collect();
        let refs: Vec<&Chunk> = flipped.iter().collect();
        let b = ppo_loss(&refs, &ac, &mirror, &cfg)
            .unwrap()
            .diagnostics
            .surrogate;
        assert!((a + b).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn mirror_loss_matches_brute_force() {
        let (ac, mirror, chunks) = setup(4);
        let refs: Vec<&Chunk> = chunks.iter().collect();
        let got = mirror_loss(&refs, &ac, &mirror).unwrap();
        let mut brute = 0.0;
        let mut n = 0.0;
        for c in &chunks {
            let mut p = ac.policy.clone();
            p.set_hidden(c.h_policy.clone()).unwrap();
            let mut q = ac.policy.clone();
            q.set_hidden(c.h_mirror.clone()).unwrap();
            for t in 0..c.len() {
                let mu = p.forward(&c.x[t]).unwrap();
                let mm = q.forward(&c.x_mirror[t]).unwrap();
                let target = mirror.mirror_act(&mu).unwrap();
                for i in 0..mu.len() {
                    brute += (mm[i] - target[i]).powi(2);
                }
                n += 1.0;
            }
        }
        assert!(got > 0.0);
        assert!((got - brute / n).abs() < 1e-12);
        let ppo = ppo_loss(&refs, &ac, &mirror, &PpoConfig::default()).unwrap();
        assert!((ppo.diagnostics.mirror - got).abs() < 1e-12);
    }

    #[test]
    fn mirror_loss_is_invariant_to_swapping_with_mirror_image() {
        let (ac, mirror, chunks) = setup(5);
        let swapped: Vec<Chunk> = chunks
            .iter()
            .map(|c| Chunk {
                x: c.x_mirror.clone(),
                x_mirror: c.x.clone(),
                h_policy: c.h_mirror.clone(),
                h_mirror: c.h_policy.clone(),
                ..c.clone()
            })
            .collect();
        let a = mirror_loss(&chunks.iter().collect::<Vec<_>>(), &ac, &mirror).unwrap();
        let b = mirror_loss(&swapped.iter().collect::<Vec<_>>(), &ac, &mirror).unwrap();
        // M_a is an orthogonal signed permutation, so |u - M v| = |M u - v|
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn symmetric_policy_has_zero_mirror_loss() {
        // a policy that only reads the command and maps it through a mirror-equivariant head
        let model = RobotModel::without_arms();
        let mirror = model.mirror_spec();
        let pc = PolicyConfig {
            hidden: vec![4],
            ..Default::default()
        };
        let mut ac = ActorCritic::new(&model, &pc, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        // zero weights: every output equals the head bias; choose a mirror-symmetric bias
        ac.policy.params.iter_mut().for_each(|p| *p = 0.0);
        let r = ac.policy.layout.head_bias_range();
        let bias = [0.1, 0.4, -0.3, 0.1, 0.4, -0.3];
        ac.policy.params[r].copy_from_slice(&bias);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let chunks = synthetic_chunks(&ac, &mirror, 2, 5, &mut rng).unwrap();
        let got = mirror_loss(&chunks.iter().collect::<Vec<_>>(), &ac, &mirror).unwrap();
        assert!(got < 1e-10);
    }
}
