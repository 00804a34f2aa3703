//! Frozen reward cases (see fixtures/reward_oracle.py) and their evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use saw_core::rewards::{
    r_action_diff, r_arm, r_base_accel, r_base_height, r_feet_airtime, r_feet_contact,
    r_feet_orientation, r_feet_position, r_rollpitch, r_torque, r_velocity, r_yaw, total_reward,
    ContactTracker, RewardConfig, TERM_NAMES,
};
use saw_core::sim::{Env, RobotModel};
use saw_core::{Command, Observation, UnitQuaternion};
use serde::Deserialize;

pub const FIXTURE: &str = "tests/fixtures/reward_cases.json";

#[derive(Debug, Deserialize)]
pub struct FixtureConfig {
    pub c_h: f64,
    pub c_feet: [[f64; 3]; 2],
    pub c_feet_rpy: [[f64; 3]; 2],
    pub c_arm: Vec<f64>,
    pub t_max: Vec<f64>,
    pub grace: f64,
    pub airtime_threshold: f64,
}

#[derive(Debug, Deserialize)]
pub struct FixtureObs {
    pub torso_rpy: [f64; 3],
    pub base_pos: [f64; 3],
    pub base_linvel: [f64; 3],
    pub base_acc: [f64; 3],
    pub foot_pos: [[f64; 3]; 2],
    pub foot_rpy: [[f64; 3]; 2],
    pub arm_pos: Vec<f64>,
    pub applied_torque: Vec<f64>,
    pub action: Vec<f64>,
    pub prev_action: Vec<f64>,
}

#[derive(Debug, Deserialize)]
pub struct FixtureCmd {
    pub c_x: f64,
    pub c_y: f64,
    pub c_yaw: f64,
    pub heading: f64,
}

#[derive(Debug, Deserialize)]
pub struct Case {
    pub name: String,
    pub term: String,
    pub obs: FixtureObs,
    pub cmd: FixtureCmd,
    pub contacts: Vec<[bool; 2]>,
    pub expected: f64,
    #[serde(default)]
    pub terms: Option<BTreeMap<String, f64>>,
    /// Rounded value quoted alongside the closed form.
    #[serde(default)]
    pub stated: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct Fixture {
    pub dt: f64,
    pub config: FixtureConfig,
    pub cases: Vec<Case>,
}

pub fn load(manifest_dir: &Path) -> Fixture {
    let text =
        std::fs::read_to_string(manifest_dir.join(FIXTURE)).expect("reward fixture readable");
    serde_json::from_str(&text).expect("reward fixture parses")
}

impl Fixture {
    pub fn reward_config(&self) -> RewardConfig {
        let mut cfg = Env::default_rewards(&RobotModel::default());
        let c = &self.config;
        cfg.c_h = c.c_h;
        cfg.c_feet = c.c_feet;
        cfg.c_feet_rpy = c.c_feet_rpy;
        cfg.c_arm = c.c_arm.clone();
        cfg.t_max = c.t_max.clone();
        cfg.grace = c.grace;
        cfg.airtime_threshold = c.airtime_threshold;
        cfg
    }

    /// Observation, command and tracker at the last step of a case.
    pub fn state(&self, case: &Case) -> (Observation, Command, ContactTracker) {
        let o = &case.obs;
        let mut tracker = ContactTracker::new();
        tracker.reset(case.contacts[0], 0.0);
        for (k, c) in case.contacts.iter().enumerate().skip(1) {
            tracker.update(*c, k as f64 * self.dt);
        }
        let now = (case.contacts.len() - 1) as f64 * self.dt;
        let obs = Observation {
            torso_orientation: UnitQuaternion::from_rpy(
                o.torso_rpy[0],
                o.torso_rpy[1],
                o.torso_rpy[2],
            ),
            base_pos: o.base_pos,
            base_linvel: o.base_linvel,
            base_acc: o.base_acc,
            foot_pos: o.foot_pos,
            foot_orientation: o.foot_rpy,
            arm_pos: o.arm_pos.clone(),
            applied_torque: o.applied_torque.clone(),
            action: o.action.clone(),
            prev_action: o.prev_action.clone(),
            contact: tracker.contact(),
            airtime: tracker.airtime(),
            touchdown: tracker.touchdown(),
            time: now,
            ..Default::default()
        };
        let cmd =
            Command::new(case.cmd.c_x, case.cmd.c_y, case.cmd.c_yaw).with_heading(case.cmd.heading);
        (obs, cmd, tracker)
    }

    /// Largest deviation between the implementation and the frozen values for one case.
    pub fn deviation(&self, case: &Case, cfg: &RewardConfig) -> f64 {
        let (obs, cmd, tr) = self.state(case);
        let term = |name: &str| -> f64 {
            match name {
                "vel_x" => r_velocity(&obs, &cmd, cfg).unwrap().0,
                "vel_y" => r_velocity(&obs, &cmd, cfg).unwrap().1,
                "yaw" => r_yaw(&obs, &cmd, cfg).unwrap(),
                "rollpitch" => r_rollpitch(&obs, cfg).unwrap(),
                "feet_contact" => r_feet_contact(&tr, &cmd, obs.time, cfg),
                "base_height" => r_base_height(&obs, cfg).unwrap(),
                "feet_airtime" => r_feet_airtime(&tr, &cmd, cfg),
                "feet_orientation" => r_feet_orientation(&obs, &cmd, cfg).unwrap(),
                "feet_position" => r_feet_position(&obs, &cmd, cfg).unwrap(),
                "arm" => r_arm(&obs, cfg).unwrap(),
                "base_accel" => r_base_accel(&obs, cfg).unwrap(),
                "action_diff" => r_action_diff(&obs, cfg).unwrap(),
                "torque" => r_torque(&obs, cfg).unwrap(),
                other => panic!("unknown term {other}"),
            }
        };
        if case.term == "total" {
            let (total, b) = total_reward(&obs, &cmd, &tr, cfg).unwrap();
            let expected = case.terms.as_ref().expect("total cases list their terms");
            let mut worst = (total - case.expected).abs();
            for (name, v) in TERM_NAMES.iter().zip(b.terms()) {
                worst = worst.max((v - expected[*name]).abs());
                worst = worst.max((term(name) - v).abs());
            }
            worst
        } else {
            (term(&case.term) - case.expected).abs()
        }
    }
}
