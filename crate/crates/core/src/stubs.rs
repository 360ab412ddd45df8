//! Tiny environments with known optimal behavior, used by tests and smoke runs.

use crate::env::{Environment, Observation, SlotInfo, Step};
use crate::prelude::*;
use crate::{Error, Result};

/// Stateless bandit: the observation never changes and action `a` pays
/// `payout[a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditStub {
    pub payout: Vec<f64>,
    slot: u64,
}

impl BanditStub {
    pub fn new(payout: Vec<f64>) -> Self {
        Self { payout, slot: 0 }
    }

    /// The fixed observation (phase part of length 4, channel part of length 2).
    pub fn observation() -> Observation {
        Observation {
            phase_part: vec![1.0, 0.0, 1.0, 0.0],
            channel_part: vec![0.5, -0.5],
        }
    }
}

impl Environment for BanditStub {
    fn num_actions(&self) -> usize {
        self.payout.len()
    }

    fn observation_shape(&self) -> (usize, usize) {
        (4, 2)
    }

    fn reset(&mut self, _seed: u64) -> Result<Observation> {
        self.slot = 0;
        Ok(Self::observation())
    }

    fn step_action(&mut self, index: usize) -> Result<Step> {
        let reward = *self.payout.get(index).ok_or(Error::ActionOutOfRange {
            k: index as i32,
            half_width: self.payout.len(),
        })?;
        self.slot += 1;
        Ok(Step {
            observation: Self::observation(),
            reward,
            info: SlotInfo {
                slot: self.slot,
                action_k: index as i32,
                reward,
                los_epoch: self.slot / 20,
                outage: false,
            },
        })
    }
}

/// Deterministic two-state chain. Action `a` moves to state `a` and pays
/// `rewards[state][a]`. The state is one-hot encoded in the phase part.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStub {
    pub rewards: [[f64; 2]; 2],
    state: usize,
    slot: u64,
}

impl ChainStub {
    pub fn new(rewards: [[f64; 2]; 2]) -> Self {
        Self {
            rewards,
            state: 0,
            slot: 0,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn observation_of(state: usize) -> Observation {
        let mut phase_part = vec![0.0; 2];
        phase_part[state] = 1.0;
        Observation {
            phase_part,
            channel_part: vec![0.0],
        }
    }

    /// Optimal action values by value iteration.
    pub fn optimal_q(&self, gamma: f64) -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..10_000 {
            let v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
            for (s, row) in q.iter_mut().enumerate() {
                for (a, qa) in row.iter_mut().enumerate() {
                    *qa = self.rewards[s][a] + gamma * v[a];
                }
            }
        }
        q
    }
}

impl Environment for ChainStub {
    fn num_actions(&self) -> usize {
        2
    }

    fn observation_shape(&self) -> (usize, usize) {
        (2, 1)
    }

    fn reset(&mut self, _seed: u64) -> Result<Observation> {
        self.state = 0;
        self.slot = 0;
        Ok(Self::observation_of(0))
    }

    fn step_action(&mut self, index: usize) -> Result<Step> {
        if index > 1 {
            return Err(Error::ActionOutOfRange {
                k: index as i32,
                half_width: 2,
            });
        }
        let reward = self.rewards[self.state][index];
        self.state = index;
        self.slot += 1;
        Ok(Step {
            observation: Self::observation_of(index),
            reward,
            info: SlotInfo {
                slot: self.slot,
                action_k: index as i32,
                reward,
                los_epoch: 0,
                outage: false,
            },
        })
    }
}
