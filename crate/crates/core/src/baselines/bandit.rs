use super::{window_count, Window};
use crate::env::{Environment, Observation, Policy};
use crate::metrics::BatchMetrics;
use crate::nncore::argmax;
use crate::prelude::*;
use crate::Result;

/// UCB1 statistics over the arms of the action set.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    counts: Vec<u64>,
    means: Vec<f64>,
    total: u64,
    /// Exploration weight, `sqrt(2)` for classic UCB1.
    pub exploration: f64,
}

impl BanditState {
    pub fn new(num_arms: usize) -> Self {
        Self::with_exploration(num_arms, core::f64::consts::SQRT_2)
    }

    pub fn with_exploration(num_arms: usize, exploration: f64) -> Self {
        Self {
            counts: vec![0; num_arms],
            means: vec![0.0; num_arms],
            total: 0,
            exploration,
        }
    }

    /// Rebuilds a state from stored statistics.
    pub fn from_parts(counts: Vec<u64>, means: Vec<f64>, exploration: f64) -> Result<Self> {
        if counts.len() != means.len() || means.iter().any(|m| !m.is_finite()) {
            return Err(crate::Error::InvalidConfig("bandit counts and means disagree".into()));
        }
        Ok(Self {
            total: counts.iter().sum(),
            counts,
            means,
            exploration,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Pulls every arm once, then maximizes `mean + c sqrt(ln t / pulls)`.
    pub fn select(&self) -> usize {
        if let Some(a) = self.counts.iter().position(|&c| c == 0) {
            return a;
        }
        let ln_t = (self.total as f64).ln();
        let scores: Vec<f64> = self
            .means
            .iter()
            .zip(&self.counts)
            .map(|(m, &c)| m + self.exploration * (ln_t / c as f64).sqrt())
            .collect();
        argmax(&scores)
    }

    /// Folds `reward` into the running mean of `arm`.
    pub fn update(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.total += 1;
        self.means[arm] += (reward - self.means[arm]) / self.counts[arm] as f64;
    }

    /// Records the outcome of the previous pull, if any, then picks the next arm.
    pub fn select_and_update(&mut self, last: Option<(usize, f64)>) -> usize {
        if let Some((arm, reward)) = last {
            self.update(arm, reward);
        }
        self.select()
    }

    /// The arm with the best empirical mean.
    pub fn best_arm(&self) -> usize {
        argmax(&self.means)
    }
}

/// Stateless multi-armed bandit baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditAgent {
    pub state: BanditState,
}

impl BanditAgent {
    pub fn new(num_arms: usize, exploration: f64) -> Self {
        Self {
            state: BanditState::with_exploration(num_arms, exploration),
        }
    }

    pub fn train<E, F>(&mut self, env: &mut E, seed: u64, total_steps: u64, report_every: usize, mut on_batch: F) -> Result<Vec<BatchMetrics>>
    where
        E: Environment + ?Sized,
        F: FnMut(&BatchMetrics) -> Result<()>,
    {
        let windows = window_count(total_steps, report_every)?;
        env.reset(seed)?;
        let mut window = Window::new(self.state.counts.len());
        let mut trace = Vec::new();
        let mut last = None;
        for batch in 0..windows {
            for _ in 0..report_every {
                let arm = self.state.select_and_update(last);
                let step = env.step_action(arm)?;
                window.record(arm, step.reward);
                last = Some((arm, step.reward));
            }
            let row = window.finish(batch, (batch + 1) * report_every as u64);
            on_batch(&row)?;
            trace.push(row);
        }
        if let Some((arm, reward)) = last {
            self.state.update(arm, reward);
        }
        Ok(trace)
    }

    /// Always plays the arm with the best empirical mean.
    pub fn greedy_policy(&self) -> impl Policy + Clone {
        let arm = self.state.best_arm();
        move |_: &Observation| arm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stubs::BanditStub;

    #[test]
    fn every_arm_once_first() {
        let mut s = BanditState::new(5);
        let mut last = None;
        let mut seen = Vec::new();
        for _ in 0..5 {
            let a = s.select_and_update(last);
            seen.push(a);
            last = Some((a, 0.3));
        }
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn converges_on_paying_arm() {
        let mut agent = BanditAgent::new(5, core::f64::consts::SQRT_2);
        let mut env = BanditStub::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        agent.train(&mut env, 0, 10_000, 1000, |_| Ok(())).unwrap();
        let frac = agent.state.counts()[0] as f64 / 10_000.0;
        assert!(frac > 0.95, "{frac}");
        assert_eq!(agent.state.best_arm(), 0);
    }

    #[test]
    fn equal_arms_share_pulls() {
        let mut agent = BanditAgent::new(2, core::f64::consts::SQRT_2);
        let mut env = BanditStub::new(vec![0.5, 0.5]);
        agent.train(&mut env, 0, 10_000, 1000, |_| Ok(())).unwrap();
        let c = agent.state.counts();
        let (lo, hi) = (c[0].min(c[1]) as f64, c[0].max(c[1]) as f64);
        assert!(hi <= 3.0 * lo, "{c:?}");
    }

    #[test]
    fn running_mean_is_exact() {
        let mut s = BanditState::new(1);
        for r in [1.0, 2.0, 6.0] {
            s.update(0, r);
        }
        assert!((s.means()[0] - 3.0).abs() < 1e-15);
    }
}
