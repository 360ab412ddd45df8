//! Across-seed summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean, sample standard deviation and two-sided 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SeedStats {
    /// With a single value the interval is unbounded.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n > 0, "no values to summarize");
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self {
                n,
                mean,
                std: 0.0,
                ci_low: f64::NEG_INFINITY,
                ci_high: f64::INFINITY,
            };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom").inverse_cdf(0.975);
        let half = t * std / (n as f64).sqrt();
        Self {
            n,
            mean,
            std,
            ci_low: mean - half,
            ci_high: mean + half,
        }
    }

    pub fn overlaps(&self, other: &SeedStats) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Mean of the last 10% of `rewards` (at least one entry).
pub fn plateau(rewards: &[f64]) -> f64 {
    let k = rewards.len().div_ceil(10).max(1);
    let tail = &rewards[rewards.len() - k..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Trailing moving average over `window` entries (shorter at the start).
pub fn smoothed(rewards: &[f64], window: usize) -> Vec<f64> {
    (0..rewards.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            rewards[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect()
}

/// Index of the first entry whose 5-entry smoothed value reaches 90% of the plateau.
pub fn convergence_index(rewards: &[f64]) -> Option<usize> {
    let target = 0.9 * plateau(rewards);
    smoothed(rewards, 5).iter().position(|&s| s >= target)
}
