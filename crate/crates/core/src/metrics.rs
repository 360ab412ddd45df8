/// One row of a training trace, emitted once per batch of environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatchMetrics {
    /// Environment steps consumed so far, including this batch.
    pub step: u64,
    pub batch: u64,
    pub mean_reward: f64,
    pub entropy: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub clip_fraction: f64,
}
