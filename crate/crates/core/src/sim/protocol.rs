//! Episodic command and push sampling.

use rand::Rng;

use super::config::{CommandCategory, SimConfig};
use crate::types::{Command, Push, PushAxis};

pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draw a command category uniformly, then each active component uniformly from
/// its range. Also returns how many control steps the command stays active.
pub fn sample_command<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SimConfig,
) -> (Command, CommandCategory, u32) {
    let cat = cfg.categories[rng.random_range(0..cfg.categories.len())];
    let r = &cfg.commands;
    let mut c = Command::standing();
    match cat {
        CommandCategory::Standing => {}
        CommandCategory::Sagittal => c.c_x = uniform(rng, r.c_x[0], r.c_x[1]),
        CommandCategory::Lateral => c.c_y = uniform(rng, r.c_y[0], r.c_y[1]),
        CommandCategory::RotateInPlace => c.c_yaw = uniform(rng, r.c_yaw[0], r.c_yaw[1]),
        CommandCategory::Omnidirectional => {
            c.c_x = uniform(rng, r.c_x[0], r.c_x[1]);
            c.c_y = uniform(rng, r.c_y[0], r.c_y[1]);
            c.c_yaw = uniform(rng, r.c_yaw[0], r.c_yaw[1]);
        }
    }
    let window = rng.random_range(cfg.command_window[0]..=cfg.command_window[1]);
    (c, cat, window)
}

/// With the configured per-step probability, emit a horizontal push along x with a
/// random sign, magnitude and duration drawn uniformly from the configured ranges.
pub fn maybe_push<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SimConfig,
    t: f64,
    height: f64,
) -> Option<Push> {
    let p = &cfg.push;
    let u: f64 = rng.random();
    if u >= p.probability {
        return None;
    }
    let magnitude = uniform(rng, p.force[0], p.force[1]);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let duration = uniform(rng, p.duration[0], p.duration[1]);
    Some(Push {
        force: sign * magnitude,
        duration,
        start_time: t,
        height,
        axis: PushAxis::X,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_probability_never_pushes() {
        let mut cfg = SimConfig::default();
        cfg.push.probability = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100_000).all(|i| maybe_push(&mut rng, &cfg, i as f64, 0.2).is_none()));
    }

    #[test]
    fn single_contact_pushes_last_one_control_step() {
        let mut cfg = SimConfig {
            push: crate::sim::PushConfig::single_contact(),
            ..SimConfig::default()
        };
        cfg.push.probability = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let p = maybe_push(&mut rng, &cfg, 0.0, 0.2).unwrap();
            assert_eq!(p.duration, 0.02);
            assert!((200.0..=800.0).contains(&p.force.abs()));
        }
    }

    #[test]
    fn standing_category_is_zero_command() {
        let cfg = SimConfig {
            categories: vec![CommandCategory::Standing],
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (c, _, w) = sample_command(&mut rng, &cfg);
        assert!(c.is_standing());
        assert!((100..=300).contains(&w));
    }

    #[test]
    fn sagittal_only_moves_x() {
        let cfg = SimConfig {
            categories: vec![CommandCategory::Sagittal],
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let (c, _, _) = sample_command(&mut rng, &cfg);
            assert!((-0.5..=2.0).contains(&c.c_x));
            assert_eq!((c.c_y, c.c_yaw), (0.0, 0.0));
        }
    }
}
