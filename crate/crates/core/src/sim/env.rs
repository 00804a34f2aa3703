use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::SimConfig;
use super::dynamics::{Dynamics, ExternalForce, PhysicsScales, SimState, TORSO};
use super::model::RobotModel;
use super::protocol::{maybe_push, sample_command, uniform};
use crate::error::{invalid, Error, Result};
use crate::policy::features;
use crate::rewards::{total_reward, ContactTracker, RewardBreakdown, RewardConfig};
use crate::types::{sha256_hex, Command, Observation, Push, PushAxis, UnitQuaternion};

/// Sole contact points start this far below the ground at reset, close to the
/// static penetration of the default contact springs.
const INITIAL_PENETRATION: f64 = 5.0e-4;

#[derive(Debug, Clone)]
struct ActivePush {
    push: Push,
    remaining_substeps: u64,
}

/// Outcome of one control step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub command: Command,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub done: bool,
    pub fallen: bool,
    pub push_started: Option<Push>,
    pub push_active: bool,
}

/// One simulated episode at a time: physics, command protocol, pushes, reward.
#[derive(Debug, Clone)]
pub struct Env {
    model: RobotModel,
    cfg: SimConfig,
    rewards: RewardConfig,
    dynamics: Dynamics,
    state: SimState,
    rng: ChaCha8Rng,
    tracker: ContactTracker,
    command: Command,
    window_left: u32,
    fixed_command: Option<Command>,
    random_pushes: bool,
    push: Option<ActivePush>,
    action: Vec<f64>,
    prev_action: Vec<f64>,
    action_delay: u32,
    prev_base_vel: [f64; 3],
    torque_sum: Vec<f64>,
    steps: u32,
    done: bool,
    fallen: bool,
    obs: Observation,
    scales: PhysicsScales,
    config_hash: String,
}

impl Env {
    pub fn new(model: RobotModel, cfg: SimConfig, rewards: RewardConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        rewards.validate()?;
        if rewards.t_max.len() != model.num_actuators() {
            return Err(invalid(
                "reward torque limits do not match the actuator count",
            ));
        }
        if rewards.c_arm.len() != model.arm_actuators().len() {
            return Err(invalid("reward arm posture does not match the model"));
        }
        let scales = PhysicsScales::unit(&model);
        let dynamics = Dynamics::new(&model, &cfg, &scales);
        let pose = model.nominal_pose();
        let state = dynamics.state_from_pose(0.0, model.nominal_height, 0.0, &pose);
        let config_hash = sha256_hex(
            serde_json::to_string(&(&model, &cfg, &rewards))
                .expect("config serializes")
                .as_bytes(),
        );
        let n = model.num_actuators();
        let mut env = Self {
            model,
            cfg,
            rewards,
            dynamics,
            state,
            rng: ChaCha8Rng::seed_from_u64(0),
            tracker: ContactTracker::new(),
            command: Command::standing(),
            window_left: 1,
            fixed_command: None,
            random_pushes: true,
            push: None,
            action: pose.clone(),
            prev_action: pose,
            action_delay: 0,
            prev_base_vel: [0.0; 3],
            torque_sum: vec![0.0; n],
            steps: 0,
            done: true,
            fallen: false,
            obs: Observation::default(),
            scales,
            config_hash,
        };
        env.reset(0);
        Ok(env)
    }

    /// Default reward targets derived from a robot model.
    pub fn default_rewards(model: &RobotModel) -> RewardConfig {
        RewardConfig {
            weights: Default::default(),
            scales: Default::default(),
            c_h: model.nominal_height,
            grace: 0.2,
            airtime_threshold: 0.4,
            c_feet: model.nominal_feet(),
            c_feet_rpy: [[0.0; 3]; 2],
            c_arm: model.nominal_arm_pose(),
            t_max: model.torque_limits(),
        }
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.rewards
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn control_dt(&self) -> f64 {
        self.cfg.control_dt()
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn dynamics(&mut self) -> &mut Dynamics {
        &mut self.dynamics
    }

    pub fn scales(&self) -> &PhysicsScales {
        &self.scales
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn command(&self) -> Command {
        self.command
    }

    pub fn tracker(&self) -> &ContactTracker {
        &self.tracker
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn has_fallen(&self) -> bool {
        self.fallen
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn action_delay(&self) -> u32 {
        self.action_delay
    }

    /// Pin the command (no episodic resampling) or restore the random protocol with `None`.
    pub fn set_fixed_command(&mut self, cmd: Option<Command>) {
        self.fixed_command = cmd;
        if let Some(c) = cmd {
            self.command = Command {
                heading_ref: self.command.heading_ref,
                ..c
            };
        }
    }

    pub fn set_random_pushes(&mut self, enabled: bool) {
        self.random_pushes = enabled;
    }

    /// Start an external push now; it replaces any push in progress.
    pub fn apply_push(&mut self, mut push: Push) -> Result<()> {
        if !(push.duration > 0.0) || !push.force.is_finite() {
            return Err(invalid("push needs a finite force and positive duration"));
        }
        if push.axis != PushAxis::X {
            return Err(invalid("the planar simulator only supports pushes along x"));
        }
        push.start_time = self.state.time;
        let remaining_substeps = (push.duration / self.cfg.physics_dt).round().max(1.0) as u64;
        self.push = Some(ActivePush {
            push,
            remaining_substeps,
        });
        Ok(())
    }

    pub fn push_active(&self) -> bool {
        self.push.is_some()
    }

    /// Reset to the nominal stance with randomized physics, perturbed joints and a fresh command.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let dr = self.cfg.randomization.clone();
        let nb = self.scales.mass.len();
        let na = self.model.num_actuators();
        let mut scales = PhysicsScales::unit(&self.model);
        for s in scales.mass.iter_mut().take(nb) {
            *s = uniform(&mut self.rng, dr.mass_scale[0], dr.mass_scale[1]);
        }
        scales.friction = uniform(&mut self.rng, dr.friction_scale[0], dr.friction_scale[1]);
        for i in 0..na {
            scales.kp[i] = uniform(&mut self.rng, dr.gain_scale[0], dr.gain_scale[1]);
            scales.kd[i] = uniform(&mut self.rng, dr.gain_scale[0], dr.gain_scale[1]);
        }
        self.action_delay = self
            .rng
            .random_range(dr.action_delay[0]..=dr.action_delay[1]);
        self.scales = scales;
        self.dynamics = Dynamics::new(&self.model, &self.cfg, &self.scales);

        let nominal = self.model.nominal_pose();
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let mut pose = nominal.clone();
        for (i, q) in pose.iter_mut().enumerate() {
            let noise = self.cfg.init_joint_noise * unit.sample(&mut self.rng);
            if noise != 0.0 {
                let j = self.model.joint(i);
                *q = (*q + noise).clamp(j.lower, j.upper);
            }
        }
        let mut state = self
            .dynamics
            .state_from_pose(0.0, self.model.nominal_height, 0.0, &pose);
        let lowest = self.dynamics.lowest_point(&state);
        state.q[1] -= lowest + INITIAL_PENETRATION;
        self.state = state;

        let contact = self.dynamics.foot_contact(&self.state);
        self.tracker.reset(contact, 0.0);
        self.command = Command::standing();
        match self.fixed_command {
            Some(c) => {
                self.command = c;
                self.window_left = u32::MAX;
            }
            None => {
                let (c, _, w) = sample_command(&mut self.rng, &self.cfg);
                self.command = c;
                self.window_left = w;
            }
        }
        self.push = None;
        self.action = nominal.clone();
        self.prev_action = nominal;
        self.prev_base_vel = [self.state.qd[0], 0.0, self.state.qd[1]];
        self.torque_sum.iter_mut().for_each(|t| *t = 0.0);
        self.steps = 0;
        self.done = false;
        self.fallen = false;
        self.obs = self.build_observation(vec![0.0; na]);
        self.obs.clone()
    }

    fn build_observation(&mut self, applied_torque: Vec<f64>) -> Observation {
        let s = &self.state;
        let na = self.model.num_actuators();
        let (x, z, pitch) = (s.q[0], s.q[1], s.q[2]);
        let vel = [s.qd[0], 0.0, s.qd[1]];
        let dt = self.cfg.control_dt();
        let base_acc = if self.steps == 0 {
            [0.0; 3]
        } else {
            [
                (vel[0] - self.prev_base_vel[0]) / dt,
                0.0,
                (vel[2] - self.prev_base_vel[2]) / dt,
            ]
        };
        let motor_pos = s.q[3..3 + na].to_vec();
        let motor_vel = s.qd[3..3 + na].to_vec();
        let arm_pos = self.model.arm_actuators().map(|i| s.q[3 + i]).collect();
        let time = s.time;
        let feet = self.dynamics.feet(&self.state);
        let mut foot_pos = [[0.0; 3]; 2];
        let mut foot_orientation = [[0.0; 3]; 2];
        for f in 0..2 {
            foot_pos[f] = [feet[f].0[0] - x, 0.0, feet[f].0[1] - z];
            foot_orientation[f] = [0.0, feet[f].1, 0.0];
        }
        Observation {
            motor_pos,
            motor_vel,
            joint_pos: Vec::new(),
            joint_vel: Vec::new(),
            torso_orientation: UnitQuaternion::from_pitch(pitch),
            base_pos: [x, 0.0, z],
            base_linvel: vel,
            base_acc,
            foot_pos,
            foot_orientation,
            contact: self.tracker.contact(),
            airtime: self.tracker.airtime(),
            touchdown: self.tracker.touchdown(),
            arm_pos,
            applied_torque,
            prev_action: self.prev_action.clone(),
            action: self.action.clone(),
            time,
        }
    }

    /// Policy features of the current observation with the randomized sensor noise added.
    pub fn policy_features(&mut self) -> Vec<f64> {
        let mut f = features(&self.obs, &self.command);
        let std = self.cfg.randomization.obs_noise_std;
        if std > 0.0 {
            let normal = Normal::new(0.0, std).expect("valid noise std");
            for v in f.iter_mut() {
                *v += normal.sample(&mut self.rng);
            }
        }
        f
    }

    fn check_fall(&self) -> bool {
        let z = self.state.q[1];
        let pitch = self.state.q[2];
        z < self.cfg.fall.min_height_fraction * self.model.nominal_height
            || pitch.abs() > self.cfg.fall.max_pitch
    }

    /// Hold the PD setpoints for one control period, then score the step.
    pub fn control_step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::Protocol(
                "control_step called on a terminated episode".into(),
            ));
        }
        let na = self.model.num_actuators();
        if action.len() != na {
            return Err(invalid(format!(
                "action has {} entries, expected {na}",
                action.len()
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(invalid("action is not finite"));
        }
        self.prev_action = std::mem::take(&mut self.action);
        self.action = action
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let j = self.model.joint(i);
                a.clamp(j.lower, j.upper)
            })
            .collect();
        let setpoints = if self.action_delay > 0 {
            self.prev_action.clone()
        } else {
            self.action.clone()
        };

        let mut push_started = None;
        if self.random_pushes && self.push.is_none() {
            if let Some(p) = maybe_push(
                &mut self.rng,
                &self.cfg,
                self.state.time,
                self.model.push_height,
            ) {
                self.apply_push(p)?;
                push_started = Some(p);
            }
        }
        let push_active = self.push.is_some();

        self.torque_sum.iter_mut().for_each(|t| *t = 0.0);
        self.prev_base_vel = [self.state.qd[0], 0.0, self.state.qd[1]];
        let height = self.model.push_height;
        for _ in 0..self.cfg.control_decimation {
            let mut ext = [ExternalForce {
                body: TORSO,
                local: [0.0, height],
                force: [0.0, 0.0],
            }];
            let n_ext = match &mut self.push {
                Some(ap) => {
                    ext[0].local = [0.0, ap.push.height];
                    ext[0].force = [ap.push.force, 0.0];
                    ap.remaining_substeps -= 1;
                    1
                }
                None => 0,
            };
            if self
                .push
                .as_ref()
                .is_some_and(|p| p.remaining_substeps == 0)
            {
                self.push = None;
            }
            if let Err(e) = self
                .dynamics
                .step(&mut self.state, Some(&setpoints), &ext[..n_ext])
            {
                self.done = true;
                return Err(e);
            }
            for (s, t) in self.torque_sum.iter_mut().zip(self.dynamics.last_torque()) {
                *s += t;
            }
        }
        self.steps += 1;
        // keep the clock on the control grid instead of accumulating substep rounding
        self.state.time = self.steps as f64 * self.cfg.control_dt();

        let contact = self.dynamics.foot_contact(&self.state);
        self.tracker.update(contact, self.state.time);
        let inv = 1.0 / self.cfg.control_decimation as f64;
        let torque: Vec<f64> = self.torque_sum.iter().map(|t| t * inv).collect();
        self.obs = self.build_observation(torque);

        let command = self.command;
        let (reward, breakdown) = total_reward(&self.obs, &command, &self.tracker, &self.rewards)?;
        self.fallen = self.fallen || self.check_fall();
        self.done = self.fallen || self.steps >= self.cfg.episode_steps();

        self.command.advance_heading(self.cfg.control_dt());
        if self.fixed_command.is_none() {
            self.window_left = self.window_left.saturating_sub(1);
            if self.window_left == 0 {
                let (c, _, w) = sample_command(&mut self.rng, &self.cfg);
                self.command = Command {
                    heading_ref: self.command.heading_ref,
                    ..c
                };
                self.window_left = w;
            }
        }

        Ok(StepResult {
            observation: self.obs.clone(),
            command,
            reward,
            breakdown,
            done: self.done,
            fallen: self.fallen,
            push_started,
            push_active,
        })
    }
}
