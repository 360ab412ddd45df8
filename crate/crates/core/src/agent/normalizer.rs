use crate::env::Observation;
use crate::prelude::*;

/// Standard deviations are floored here before dividing.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-component streaming mean and population variance (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    /// Rebuilds from stored moments (`m2` is the sum of squared deviations).
    pub fn from_parts(count: u64, mean: Vec<f64>, m2: Vec<f64>) -> Self {
        assert_eq!(mean.len(), m2.len());
        Self { count, mean, m2 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    pub fn update(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    pub fn std(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.count as f64;
        self.m2.iter().map(|s| (s / n).max(0.0).sqrt()).collect()
    }

    /// `(x - mean) / max(std, floor)`
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(self.std())
            .map(|((v, m), s)| (v - m) / s.max(STD_FLOOR))
            .collect()
    }
}

/// Separate running statistics for the phase and channel parts of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNormalizer {
    pub phase: RunningStats,
    pub channel: RunningStats,
}

impl RunningNormalizer {
    pub fn new(phase_dim: usize, channel_dim: usize) -> Self {
        Self {
            phase: RunningStats::new(phase_dim),
            channel: RunningStats::new(channel_dim),
        }
    }

    /// Adds `obs` to the statistics, then normalizes it.
    pub fn normalize_observation(&mut self, obs: &Observation) -> Observation {
        self.phase.update(&obs.phase_part);
        self.channel.update(&obs.channel_part);
        self.normalize_frozen(obs)
    }

    /// Normalizes without touching the statistics (evaluation mode).
    pub fn normalize_frozen(&self, obs: &Observation) -> Observation {
        Observation {
            phase_part: self.phase.normalize(&obs.phase_part),
            channel_part: self.channel.normalize(&obs.channel_part),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(p: &[f64], c: &[f64]) -> Observation {
        Observation {
            phase_part: p.to_vec(),
            channel_part: c.to_vec(),
        }
    }

    #[test]
    fn first_sample_normalizes_to_zero() {
        let mut n = RunningNormalizer::new(2, 1);
        let out = n.normalize_observation(&obs(&[3.0, -1.0], &[7.0]));
        assert_eq!(out, obs(&[0.0, 0.0], &[0.0]));
    }

    #[test]
    fn two_sample_scalar_stream() {
        let mut n = RunningNormalizer::new(1, 1);
        n.normalize_observation(&obs(&[1.0], &[1.0]));
        let out = n.normalize_observation(&obs(&[3.0], &[3.0]));
        assert!((out.phase_part[0] - 1.0).abs() < 1e-15);
        assert!((out.channel_part[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_stream_stays_zero() {
        let mut n = RunningNormalizer::new(3, 2);
        for _ in 0..100 {
            let out = n.normalize_observation(&obs(&[1.0, 1.0, -2.0], &[0.5, 0.5]));
            assert!(out.flatten().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn streaming_matches_batch_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut stats = RunningStats::new(3);
        let data: Vec<Vec<f64>> = (0..5000)
            .map(|_| (0..3).map(|i| rng.random_range(-1.0..1.0) * (i + 1) as f64 + 10.0).collect())
            .collect();
        for row in &data {
            stats.update(row);
        }
        let n = data.len() as f64;
        for j in 0..3 {
            let mean = data.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = data.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            assert!((stats.mean()[j] - mean).abs() < 1e-9);
            assert!((stats.std()[j] - var.sqrt()).abs() < 1e-9);
        }
    }
}
