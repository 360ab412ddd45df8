//! Returns and advantage estimators for a batch-truncated continuing task.

use crate::prelude::*;
use crate::{Error, Result};

/// Discounted rewards-to-go, bootstrapped with `bootstrap` after the last step:
/// `R_t = r_t + gamma R_{t+1}`, `R_T = bootstrap`.
pub fn compute_rewards_to_go(rewards: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut running = bootstrap;
    for t in (0..rewards.len()).rev() {
        running = rewards[t] + gamma * running;
        out[t] = running;
    }
    out
}

/// Generalized advantage estimation by backward recursion over TD residuals.
pub fn compute_gae(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    assert_eq!(rewards.len(), values.len(), "rewards and values must align");
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    adv
}

/// Mean and population standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardizes a set of advantages: `(a - mean) / max(std, 1e-8)`.
pub fn normalize_advantages(adv: &[f64]) -> Result<Vec<f64>> {
    if adv.len() < 2 {
        return Err(Error::MiniBatchTooSmall(adv.len()));
    }
    let (mean, std) = mean_std(adv);
    let std = std.max(super::normalizer::STD_FLOOR);
    Ok(adv.iter().map(|a| (a - mean) / std).collect())
}

/// Same as [`normalize_advantages`], applied to one mini-batch.
pub fn normalize_advantages_minibatch(adv: &[f64]) -> Result<Vec<f64>> {
    normalize_advantages(adv)
}
