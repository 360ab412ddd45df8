use super::{window_count, Window};
use crate::env::{ActionSpace, Environment, Observation, Policy};
use crate::metrics::BatchMetrics;
use crate::prelude::*;
use crate::rng::{substream, SimRng, Stream};
use crate::Result;
use rand::Rng;

/// Uniform draw of a DFT action `k` in `-n..=n`.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, space: &ActionSpace) -> i32 {
    space.k_of(rng.random_range(0..space.size()))
}

/// Ignores the observation and picks uniformly among `num_actions` indices.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    num_actions: usize,
    rng: SimRng,
}

impl RandomPolicy {
    pub fn new(num_actions: usize, seed: u64) -> Self {
        Self {
            num_actions,
            rng: substream(seed, Stream::Policy),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _observation: &Observation) -> usize {
        self.rng.random_range(0..self.num_actions)
    }
}

/// The random-reflection benchmark. It does not learn; "training" only
/// records its reward trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomAgent {
    pub num_actions: usize,
}

impl RandomAgent {
    pub fn train<E, F>(&self, env: &mut E, seed: u64, total_steps: u64, report_every: usize, mut on_batch: F) -> Result<Vec<BatchMetrics>>
    where
        E: Environment + ?Sized,
        F: FnMut(&BatchMetrics) -> Result<()>,
    {
        let windows = window_count(total_steps, report_every)?;
        let mut policy = RandomPolicy::new(self.num_actions, seed);
        let mut obs = env.reset(seed)?;
        let mut window = Window::new(self.num_actions);
        let mut trace = Vec::new();
        for batch in 0..windows {
            for _ in 0..report_every {
                let a = policy.act(&obs);
                let step = env.step_action(a)?;
                window.record(a, step.reward);
                obs = step.observation;
            }
            let row = window.finish(batch, (batch + 1) * report_every as u64);
            on_batch(&row)?;
            trace.push(row);
        }
        Ok(trace)
    }

    pub fn policy(&self, seed: u64) -> RandomPolicy {
        RandomPolicy::new(self.num_actions, seed)
    }
}
