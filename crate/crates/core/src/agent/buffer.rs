use super::advantage::{compute_gae, compute_rewards_to_go};
use crate::env::Observation;
use crate::prelude::*;
use crate::{Error, Result};

/// One collected step. Hidden states are the ones the networks saw on entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<H> {
    /// Already normalized.
    pub observation: Observation,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub actor_hidden: H,
    pub critic_hidden: H,
    pub los_epoch: u64,
}

/// Fixed-capacity on-policy storage for one PPO batch.
#[derive(Debug, Clone)]
pub struct RolloutBuffer<H> {
    capacity: usize,
    transitions: Vec<Transition<H>>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

impl<H: Clone> RolloutBuffer<H> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            transitions: Vec::with_capacity(capacity),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.transitions.len() == self.capacity
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
        self.advantages.clear();
        self.returns.clear();
    }

    pub fn push(&mut self, t: Transition<H>) -> Result<()> {
        if self.is_full() {
            return Err(Error::InvalidConfig(format!("rollout buffer already holds {} steps", self.capacity)));
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn transitions(&self) -> &[Transition<H>] {
        &self.transitions
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.value).collect()
    }

    /// Indices where the line-of-sight epoch changes from the previous step.
    pub fn epoch_boundaries(&self) -> Vec<usize> {
        (1..self.transitions.len())
            .filter(|&i| self.transitions[i].los_epoch != self.transitions[i - 1].los_epoch)
            .collect()
    }

    /// Computes GAE advantages and discounted value targets, bootstrapping
    /// with the critic's value of the state after the last step.
    pub fn finish(&mut self, bootstrap: f64, gamma: f64, lambda: f64) -> Result<()> {
        self.require_full()?;
        let rewards = self.rewards();
        self.advantages = compute_gae(&rewards, &self.values(), bootstrap, gamma, lambda);
        self.returns = compute_rewards_to_go(&rewards, bootstrap, gamma);
        Ok(())
    }

    /// Overrides the targets, e.g. to drive an update with synthetic advantages.
    pub fn set_targets(&mut self, advantages: Vec<f64>, returns: Vec<f64>) -> Result<()> {
        self.require_full()?;
        for v in [&advantages, &returns] {
            if v.len() != self.capacity {
                return Err(Error::ShapeMismatch {
                    expected: vec![self.capacity],
                    got: vec![v.len()],
                });
            }
        }
        self.advantages = advantages;
        self.returns = returns;
        Ok(())
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub(crate) fn require_full(&self) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(Error::BufferNotFull {
                len: self.transitions.len(),
                capacity: self.capacity,
            })
        }
    }

    pub(crate) fn require_targets(&self) -> Result<()> {
        self.require_full()?;
        if self.advantages.len() != self.capacity {
            return Err(Error::Uninitialized);
        }
        Ok(())
    }
}
