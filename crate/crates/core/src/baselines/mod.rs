//! Comparison agents over the same environment interface and action set as
//! the recurrent PPO agent.
//!
//! The non-PPO learners report one [`BatchMetrics`] row per window of
//! `report_every` steps. Their `entropy` column is the entropy of the
//! empirical action frequencies inside the window and `actor_loss` and
//! `clip_fraction` are zero.

mod bandit;
mod dqn;
mod random;
mod vanilla;

pub use bandit::{BanditAgent, BanditState};
pub use dqn::{double_dqn_targets, epsilon_at, DqnAgent, DqnConfig, QPolicy, ReplayBuffer, ReplayItem};
pub use random::{random_policy, RandomAgent, RandomPolicy};
pub use vanilla::vanilla_ppo_agent;

use crate::metrics::BatchMetrics;
use crate::nncore::entropy;
use crate::prelude::*;
use crate::{Error, Result};

/// Accumulates one reporting window.
#[derive(Debug, Clone)]
pub(crate) struct Window {
    counts: Vec<u64>,
    reward_sum: f64,
    loss_sum: f64,
    loss_count: u64,
    steps: u64,
}

impl Window {
    pub(crate) fn new(num_actions: usize) -> Self {
        Self {
            counts: vec![0; num_actions],
            reward_sum: 0.0,
            loss_sum: 0.0,
            loss_count: 0,
            steps: 0,
        }
    }

    pub(crate) fn record(&mut self, action: usize, reward: f64) {
        self.counts[action] += 1;
        self.reward_sum += reward;
        self.steps += 1;
    }

    pub(crate) fn record_loss(&mut self, loss: f64) {
        self.loss_sum += loss;
        self.loss_count += 1;
    }

    /// Emits the row for window `batch` and starts a fresh window.
    pub(crate) fn finish(&mut self, batch: u64, step: u64) -> BatchMetrics {
        let n = self.steps.max(1) as f64;
        let freqs: Vec<f64> = self.counts.iter().map(|&c| c as f64 / n).collect();
        let row = BatchMetrics {
            step,
            batch,
            mean_reward: self.reward_sum / n,
            entropy: entropy(&freqs),
            actor_loss: 0.0,
            critic_loss: if self.loss_count > 0 {
                self.loss_sum / self.loss_count as f64
            } else {
                0.0
            },
            clip_fraction: 0.0,
        };
        *self = Self::new(self.counts.len());
        row
    }
}

/// Number of full reporting windows in `total_steps`; at least one is required.
pub(crate) fn window_count(total_steps: u64, report_every: usize) -> Result<u64> {
    if report_every == 0 || total_steps < report_every as u64 {
        return Err(Error::InvalidConfig(format!(
            "total_steps {total_steps} must cover at least one report window of {report_every}"
        )));
    }
    Ok(total_steps / report_every as u64)
}
