//! Standalone physics and reward checks with measured tolerances.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::rewards::{total_reward, ContactTracker, RewardConfig};
use crate::sim::dynamics::TORSO;
use crate::sim::{Dynamics, ExternalForce, PhysicsScales, RobotModel, SimConfig};
use crate::types::{Command, Observation, UnitQuaternion};

/// One measured invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Human-readable acceptance band, e.g. "< 1e-6" or "[0.99, 1.01]".
    pub bound: String,
    pub passed: bool,
}

impl Check {
    fn below(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: format!("<= {limit:e}"),
            passed: measured <= limit,
        }
    }

    fn within(name: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: format!("[{lo}, {hi}]"),
            passed: (lo..=hi).contains(&measured),
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn airborne(model: &RobotModel, sim: &SimConfig, gravity: f64) -> (Dynamics, crate::sim::SimState) {
    let cfg = SimConfig {
        gravity,
        ..sim.clone()
    };
    let d = Dynamics::new(model, &cfg, &PhysicsScales::unit(model));
    let s = d.state_from_pose(0.0, 3.0, 0.0, &model.nominal_pose());
    (d, s)
}

/// Unactuated body dropped with an initial velocity, far from the ground: the base
/// must follow `z0 + v0 t - g t^2 / 2` (and constant x velocity).
pub fn free_fall(model: &RobotModel, sim: &SimConfig, duration: f64) -> Result<Check> {
    let (mut d, mut s) = airborne(model, sim, sim.gravity);
    let v0 = [0.3, 1.5];
    s.qd[0] = v0[0];
    s.qd[1] = v0[1];
    let (x0, z0) = (s.q[0], s.q[1]);
    let steps = (duration / d.dt()).round() as usize;
    let mut worst: f64 = 0.0;
    for k in 1..=steps {
        d.step(&mut s, None, &[])?;
        let t = k as f64 * d.dt();
        let z = z0 + v0[1] * t - 0.5 * sim.gravity * t * t;
        let x = x0 + v0[0] * t;
        worst = worst.max((s.q[1] - z).abs()).max((s.q[0] - x).abs());
    }
    Ok(Check::below(
        format!("free fall {duration} s: max base deviation (m)"),
        worst,
        1e-6,
    ))
}

/// Horizontal push on the torso of a floating robot holding its pose: Δp_x / (F Δt).
pub fn push_ratio(model: &RobotModel, sim: &SimConfig, force: f64, duration: f64) -> Result<f64> {
    let (mut d, mut s) = airborne(model, sim, 0.0);
    let sp = model.nominal_pose();
    // get past the start-up half kick so every push substep gets a full kick
    for _ in 0..4 {
        d.step(&mut s, Some(&sp), &[])?;
    }
    let p0 = d.linear_momentum(&s)[0];
    let steps = (duration / d.dt()).round() as usize;
    let ext = [ExternalForce {
        body: TORSO,
        local: [0.0, model.push_height],
        force: [force, 0.0],
    }];
    for _ in 0..steps {
        d.step(&mut s, Some(&sp), &ext)?;
    }
    let p1 = d.linear_momentum(&s)[0];
    Ok((p1 - p0) / (force * steps as f64 * d.dt()))
}

/// Impulse-momentum over pushes spanning both training push distributions.
pub fn push_test(model: &RobotModel, sim: &SimConfig) -> Result<Vec<Check>> {
    let cases = [
        (200.0, 0.02),
        (500.0, 0.02),
        (800.0, 0.02),
        (20.0, 0.2),
        (110.0, 0.35),
        (200.0, 0.5),
    ];
    cases
        .iter()
        .map(|&(f, dt)| {
            let r = push_ratio(model, sim, f, dt)?;
            Ok(Check::within(
                format!("push {f} N x {dt} s: dp/(F dt)"),
                r,
                0.99,
                1.01,
            ))
        })
        .collect()
}

/// Passive drop onto the ground. Returns the largest energy gain over any window of
/// at most one second after first contact, as a fraction of the initial energy.
pub fn drop_energy_gain(
    model: &RobotModel,
    sim: &SimConfig,
    height: f64,
    duration: f64,
) -> Result<f64> {
    let mut d = Dynamics::new(model, sim, &PhysicsScales::unit(model));
    let mut s = d.state_from_pose(0.0, 1.0, 0.0, &model.nominal_pose());
    let low = d.lowest_point(&s);
    s.q[1] += height - low;
    let e0 = d.energy(&s).total();
    let sample_every = sim.control_decimation.max(1) as usize;
    let steps = (duration / d.dt()).round() as usize;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut touched = false;
    for k in 1..=steps {
        d.step(&mut s, None, &[])?;
        touched = touched || d.last_contacts().iter().any(|c| c.normal > 0.0);
        if touched && k % sample_every == 0 {
            samples.push((s.time, d.energy(&s).total()));
        }
    }
    let mut worst: f64 = 0.0;
    for (i, &(ti, ei)) in samples.iter().enumerate() {
        for &(tj, ej) in &samples[i + 1..] {
            if tj - ti > 1.0 + 1e-9 {
                break;
            }
            worst = worst.max((ej - ei) / e0.abs());
        }
    }
    Ok(worst)
}

pub fn drop_test(model: &RobotModel, sim: &SimConfig) -> Result<Vec<Check>> {
    [0.05, 0.2, 0.5]
        .iter()
        .map(|&h| {
            let g = drop_energy_gain(model, sim, h, 3.0)?;
            Ok(Check::below(
                format!("passive drop from {h} m: energy gain per second (fraction)"),
                g,
                0.01,
            ))
        })
        .collect()
}

fn uni<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..=hi)
}

fn uni3<R: Rng + ?Sized>(rng: &mut R, s: f64) -> [f64; 3] {
    [uni(rng, -s, s), uni(rng, -s, s), uni(rng, -s, s)]
}

fn uni_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| uni(rng, -s, s)).collect()
}

/// Random observation, command and contact history spanning (and exceeding) the
/// ranges the simulator produces.
pub fn random_reward_state<R: Rng + ?Sized>(
    rng: &mut R,
    model: &RobotModel,
) -> (Observation, Command, ContactTracker) {
    let na = model.num_actuators();
    let torque = model
        .torque_limits()
        .iter()
        .map(|l| l * uni(rng, -1.5, 1.5))
        .collect();
    let foot = |rng: &mut R| {
        [
            uni(rng, -0.5, 0.5),
            uni(rng, -0.4, 0.4),
            uni(rng, -1.0, 0.0),
        ]
    };
    let mut obs = Observation {
        motor_pos: uni_vec(rng, na, 2.0),
        motor_vel: uni_vec(rng, na, 10.0),
        torso_orientation: UnitQuaternion::from_rpy(
            uni(rng, -PI, PI),
            uni(rng, -1.5, 1.5),
            uni(rng, -PI, PI),
        ),
        base_pos: [uni(rng, -5.0, 5.0), uni(rng, -5.0, 5.0), uni(rng, 0.2, 1.2)],
        base_linvel: uni3(rng, 3.0),
        base_acc: uni3(rng, 60.0),
        foot_pos: [foot(rng), foot(rng)],
        foot_orientation: [uni3(rng, 1.0), uni3(rng, 1.0)],
        arm_pos: uni_vec(rng, model.arm_actuators().len(), 2.0),
        applied_torque: torque,
        prev_action: uni_vec(rng, na, 2.0),
        action: uni_vec(rng, na, 2.0),
        ..Default::default()
    };
    let heading = uni(rng, -PI, PI);
    let cmd = if rng.random_bool(0.25) {
        Command::standing().with_heading(heading)
    } else {
        Command::new(
            uni(rng, -1.0, 2.0),
            uni(rng, -0.6, 0.6),
            uni(rng, -0.6, 0.6),
        )
        .with_heading(heading)
    };
    let p = uni(rng, 0.1, 0.9);
    let mut t = uni(rng, 0.0, 10.0);
    let mut tracker = ContactTracker::new();
    tracker.reset([rng.random_bool(p), rng.random_bool(p)], t);
    for _ in 0..rng.random_range(1..=60) {
        t += 0.02;
        tracker.update([rng.random_bool(p), rng.random_bool(p)], t);
    }
    obs.time = t;
    obs.contact = tracker.contact();
    obs.airtime = tracker.airtime();
    obs.touchdown = tracker.touchdown();
    (obs, cmd, tracker)
}

/// Fuzz the reward: non-airtime total bounded by the weight sum and left/right invariance.
pub fn reward_audit(
    model: &RobotModel,
    rewards: &RewardConfig,
    samples: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = model.mirror_spec();
    let mut max_bounded = f64::NEG_INFINITY;
    let mut term_excursion: f64 = 0.0;
    let mut mirror_gap: f64 = 0.0;
    for _ in 0..samples {
        let (obs, cmd, tracker) = random_reward_state(&mut rng, model);
        let (_, b) = total_reward(&obs, &cmd, &tracker, rewards)?;
        max_bounded = max_bounded.max(b.bounded_total(&rewards.weights));
        for (i, t) in b.terms().iter().enumerate() {
            if i != 6 {
                term_excursion = term_excursion.max(-t).max(t - 1.0);
            }
        }
        let (mr, _) = total_reward(
            &spec.mirror_obs(&obs)?,
            &cmd.mirrored(),
            &tracker.mirrored(),
            rewards,
        )?;
        mirror_gap = mirror_gap.max((mr - b.total).abs());
    }
    let weight_sum: f64 = rewards
        .weights
        .as_array()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != 6)
        .map(|(_, w)| w)
        .sum();
    Ok(vec![
        Check::below(
            format!("max non-airtime total over {samples} states"),
            max_bounded,
            weight_sum + 1e-12,
        ),
        Check::below(
            "largest excursion of a bounded term outside [0, 1]",
            term_excursion,
            0.0,
        ),
        Check::below("max |R(o, c) - R(M(o), M(c))|", mirror_gap, 1e-12),
    ])
}
