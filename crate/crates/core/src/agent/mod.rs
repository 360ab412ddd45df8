//! The recurrent PPO agent and the pieces it shares with the baselines.

pub mod advantage;
pub mod buffer;
pub mod network;
pub mod normalizer;
pub mod ppo;

pub use advantage::{compute_gae, compute_rewards_to_go, mean_std, normalize_advantages, normalize_advantages_minibatch};
pub use buffer::{RolloutBuffer, Transition};
pub use network::{BranchHidden, DualBranchCache, DualBranchNet, MlpNet, SequenceNet};
pub use normalizer::{RunningNormalizer, RunningStats, STD_FLOOR};
pub use ppo::{
    clip_target, greedy_action, select_action, ActionChoice, AdvantageNormalization, GreedyPolicy, PpoAgent, PpoHyperparams, RolloutCursor,
    UpdateDiagnostics, ACTOR_HEAD_SCALE,
};
