//! LSTM controller: recurrent network, Gaussian exploration, observation
//! normalization, checkpoints and the [`Controller`] interface used by rollouts.

mod features;
pub mod lstm;
mod normalizer;

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use features::features;
pub use lstm::{HiddenState, LstmLayout, Trace};
pub use normalizer::Normalizer;

use crate::error::{invalid, Error, Result};
use crate::sim::RobotModel;
use crate::types::{sha256_hex, Command, Observation};

pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 1.0;
pub const CHECKPOINT_VERSION: u32 = 1;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Anything that maps the current observation to PD setpoints.
pub trait Controller {
    /// Called at every episode start.
    fn reset(&mut self);
    /// `features` is the (possibly noisy) policy input for `obs` and `cmd`.
    fn act(&mut self, obs: &Observation, cmd: &Command, features: &[f64]) -> Result<Vec<f64>>;
    /// Identifies the controller in reports.
    fn fingerprint(&self) -> String {
        String::new()
    }
}

/// Holds a fixed setpoint vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldPose(pub Vec<f64>);

impl Controller for HoldPose {
    fn reset(&mut self) {}

    fn act(&mut self, _: &Observation, _: &Command, _: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.clone())
    }

    fn fingerprint(&self) -> String {
        format!("hold-pose:{:?}", self.0)
    }
}

/// Hand-tuned standing feedback: ankles react to the base leaning past the feet,
/// hips to torso pitch. Holds the nominal stance indefinitely on flat ground.
#[derive(Debug, Clone, PartialEq)]
pub struct StanceController {
    pub nominal: Vec<f64>,
    /// Foot sole-centre offset ahead of the hip at the nominal pose, m.
    pub foot_offset: f64,
    /// rad per m of lean
    pub k_lean: f64,
    /// rad per m/s of base velocity
    pub k_vel: f64,
    /// rad per rad of torso pitch
    pub k_pitch: f64,
}

impl StanceController {
    pub fn new(model: &RobotModel) -> Self {
        Self {
            nominal: model.nominal_pose(),
            foot_offset: model.nominal_feet()[0][0],
            k_lean: 2.0,
            k_vel: 0.5,
            k_pitch: 1.0,
        }
    }
}

impl Controller for StanceController {
    fn reset(&mut self) {}

    fn act(&mut self, obs: &Observation, _: &Command, _: &[f64]) -> Result<Vec<f64>> {
        let mut a = self.nominal.clone();
        let lean = self.foot_offset - 0.5 * (obs.foot_pos[0][0] + obs.foot_pos[1][0]);
        let pitch = obs.torso_orientation.to_rpy()[1];
        for leg in 0..2 {
            a[3 * leg] += self.k_pitch * pitch;
            a[3 * leg + 2] += self.k_lean * lean + self.k_vel * obs.base_linvel[0];
        }
        Ok(a)
    }

    fn fingerprint(&self) -> String {
        format!("stance:{}:{}:{}", self.k_lean, self.k_vel, self.k_pitch)
    }
}

/// Network shape and initialisation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Std multiplier for the action-head weights.
    pub head_gain: f64,
    /// The value network predicts `V / value_scale`.
    pub value_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            init_log_std: -1.0,
            head_gain: 0.01,
            value_scale: 50.0,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(invalid(
                "policy hidden sizes must be non-empty and positive",
            ));
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.init_log_std) {
            return Err(invalid("init_log_std outside the clamp range"));
        }
        if !(self.head_gain >= 0.0) || !(self.value_scale > 0.0) {
            return Err(invalid("head_gain must be >= 0 and value_scale > 0"));
        }
        Ok(())
    }
}

pub fn clamp_log_std(v: f64) -> f64 {
    v.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// Diagonal Gaussian log density.
pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), &ls)| {
            let ls = clamp_log_std(ls);
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Draw `mean + exp(log_std) * z` and return it with its log density.
pub fn sample_action<R: Rng + ?Sized>(
    mean: &[f64],
    log_std: &[f64],
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, &ls)| {
            let z: f64 = StandardNormal.sample(rng);
            m + clamp_log_std(ls).exp() * z
        })
        .collect();
    let lp = gaussian_log_prob(&action, mean, log_std);
    (action, lp)
}

/// Entropy of the diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std
        .iter()
        .map(|&ls| clamp_log_std(ls) + 0.5 + HALF_LN_2PI)
        .sum()
}

/// Recurrent policy (mean head + log-std) or value network, with its own hidden state.
#[derive(Debug, Clone)]
pub struct LstmNet {
    pub layout: LstmLayout,
    pub params: Vec<f64>,
    hidden: HiddenState,
    cache: Option<Trace>,
}

impl LstmNet {
    pub fn new(layout: LstmLayout, params: Vec<f64>) -> Result<Self> {
        if params.len() != layout.num_params() {
            return Err(invalid("parameter count does not match the layout"));
        }
        let hidden = HiddenState::zeros(&layout);
        Ok(Self {
            layout,
            params,
            hidden,
            cache: None,
        })
    }

    pub fn random<R: Rng + ?Sized>(layout: LstmLayout, rng: &mut R, head_gain: f64) -> Self {
        let params = lstm::init_params(&layout, rng, head_gain);
        let hidden = HiddenState::zeros(&layout);
        Self {
            layout,
            params,
            hidden,
            cache: None,
        }
    }

    pub fn hidden(&self) -> &HiddenState {
        &self.hidden
    }

    pub fn set_hidden(&mut self, h: HiddenState) -> Result<()> {
        if h.h.len() != self.layout.hidden.len()
            || h.h
                .iter()
                .zip(&self.layout.hidden)
                .any(|(v, &n)| v.len() != n)
        {
            return Err(invalid("hidden state does not match the layer sizes"));
        }
        self.hidden = h;
        Ok(())
    }

    pub fn reset_hidden(&mut self) {
        self.hidden.zero();
        self.cache = None;
    }

    /// One step from the carried hidden state.
    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        lstm::step(&self.layout, &self.params, &mut self.hidden, x)
    }

    /// Run a sequence from the carried hidden state and cache it for [`Self::backward`].
    pub fn forward_sequence(&mut self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let tr = lstm::forward(&self.layout, &self.params, &self.hidden, xs)?;
        self.hidden = tr.final_state.clone();
        let out = tr.outputs.clone();
        self.cache = Some(tr);
        Ok(out)
    }

    /// Parameter gradient for upstream gradients on the last cached sequence's outputs.
    pub fn backward(&self, d_out: &[Vec<f64>]) -> Result<Vec<f64>> {
        let tr = self.cache.as_ref().ok_or_else(|| {
            Error::Protocol("backward called without a cached forward sequence".into())
        })?;
        if d_out.len() != tr.len() {
            return Err(Error::Protocol(format!(
                "cached sequence has {} steps but {} upstream gradients were given",
                tr.len(),
                d_out.len()
            )));
        }
        let mut g = vec![0.0; self.params.len()];
        lstm::backward(&self.layout, &self.params, tr, d_out, &mut g)?;
        Ok(g)
    }

    pub fn log_std(&self) -> Vec<f64> {
        match self.layout.log_std_range() {
            Some(r) => self.params[r].iter().map(|&v| clamp_log_std(v)).collect(),
            None => Vec::new(),
        }
    }
}

/// Policy network, value network and the shared observation normalizer.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub policy: LstmNet,
    pub value: LstmNet,
    pub normalizer: Normalizer,
    pub value_scale: f64,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(
        model: &RobotModel,
        cfg: &PolicyConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let input = model.feature_dim();
        let out = model.num_actuators();
        let pl = LstmLayout::new(input, &cfg.hidden, out, true)?;
        let vl = LstmLayout::new(input, &cfg.hidden, 1, false)?;
        let mut policy = LstmNet::random(pl, rng, cfg.head_gain);
        if let Some(r) = policy.layout.log_std_range() {
            policy.params[r]
                .iter_mut()
                .for_each(|v| *v = cfg.init_log_std);
        }
        let value = LstmNet::random(vl, rng, 1.0);
        Ok(Self {
            policy,
            value,
            normalizer: Normalizer::new(input),
            value_scale: cfg.value_scale,
        })
    }

    pub fn reset_hidden(&mut self) {
        self.policy.reset_hidden();
        self.value.reset_hidden();
    }

    /// SHA-256 over the parameters and normalizer statistics.
    pub fn fingerprint(&self) -> String {
        let bytes =
            serde_json::to_vec(&(&self.policy.params, &self.value.params, &self.normalizer))
                .expect("parameters serialize");
        sha256_hex(&bytes)
    }

    pub fn to_checkpoint(&self, config_hash: &str, iteration: u64) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            iteration,
            config_hash: config_hash.into(),
            policy_layout: self.policy.layout.clone(),
            policy_params: self.policy.params.clone(),
            value_layout: self.value.layout.clone(),
            value_params: self.value.params.clone(),
            normalizer: self.normalizer.clone(),
            value_scale: self.value_scale,
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        c.check()?;
        Ok(Self {
            policy: LstmNet::new(c.policy_layout.rebuilt()?, c.policy_params.clone())?,
            value: LstmNet::new(c.value_layout.rebuilt()?, c.value_params.clone())?,
            normalizer: c.normalizer.clone(),
            value_scale: c.value_scale,
        })
    }
}

pub const CHECKPOINT_FORMAT: &str = "saw-actor-critic";

/// Versioned JSON container for a trained actor-critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub iteration: u64,
    pub config_hash: String,
    pub policy_layout: LstmLayout,
    pub policy_params: Vec<f64>,
    pub value_layout: LstmLayout,
    pub value_params: Vec<f64>,
    pub normalizer: Normalizer,
    pub value_scale: f64,
}

impl Checkpoint {
    fn check(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Schema(format!(
                "not a policy checkpoint (format {:?})",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        if self.normalizer.dim() != self.policy_layout.input
            || self.value_layout.input != self.policy_layout.input
        {
            return Err(Error::Schema("checkpoint input widths disagree".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let c: Checkpoint = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        c.check()?;
        Ok(c)
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("checkpoint serializes"))
    }
}

/// Deterministic (mean-action) or stochastic controller backed by a trained policy.
#[derive(Debug, Clone)]
pub struct PolicyController<R> {
    pub net: ActorCritic,
    /// When set, actions are sampled from the exploration distribution.
    pub rng: Option<R>,
    fingerprint: String,
}

impl<R: Rng> PolicyController<R> {
    pub fn new(net: ActorCritic, rng: Option<R>) -> Self {
        let fingerprint = net.fingerprint();
        Self {
            net,
            rng,
            fingerprint,
        }
    }
}

impl<R: Rng> Controller for PolicyController<R> {
    fn reset(&mut self) {
        self.net.reset_hidden();
    }

    fn act(&mut self, _: &Observation, _: &Command, features: &[f64]) -> Result<Vec<f64>> {
        let x = self.net.normalizer.normalize(features)?;
        let mean = self.net.policy.forward(&x)?;
        Ok(match &mut self.rng {
            Some(rng) => sample_action(&mean, &self.net.policy.log_std(), rng).0,
            None => mean,
        })
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}
