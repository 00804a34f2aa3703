use crate::error::{invalid, Result};

/// Generalized advantage estimation over one trajectory.
///
/// `bootstrap` is the value of the state after the last step; it is ignored
/// when that step is terminal. Returns `(advantages, returns)`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(invalid("rewards, values and dones must have equal length"));
    }
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Shift and scale to zero mean and unit (population) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if adv.len() < 2 {
        adv.iter_mut().for_each(|a| *a = 0.0);
        return;
    }
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        adv.iter_mut().for_each(|a| *a = 0.0);
        return;
    }
    adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
}
