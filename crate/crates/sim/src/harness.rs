//! Training, evaluation and the multi-run experiments.

use crate::checkpoint::Checkpoint;
use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{Result, SimError};
use crate::metrics::MetricsWriter;
use crate::stats::{convergence_index, plateau, SeedStats};
use irs_core::agent::{DualBranchNet, MlpNet, PpoAgent};
use irs_core::baselines::{vanilla_ppo_agent, BanditAgent, BanditState, DqnAgent, RandomAgent};
use irs_core::env::{evaluate_policy, ActionSpace, EnvConfig, Environment, IrsEnv, Policy};
use irs_core::metrics::BatchMetrics;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Any of the agents, trained or freshly initialized.
#[derive(Debug, Clone)]
pub enum TrainedAgent {
    Random(RandomAgent),
    Bandit(BanditAgent),
    Dqn(Box<DqnAgent>),
    VanillaPpo(Box<PpoAgent<MlpNet>>),
    PpoGru(Box<PpoAgent<DualBranchNet>>),
}

impl TrainedAgent {
    /// Fresh agent for the environment described by `cfg`; initialization
    /// is seeded from `seed`.
    pub fn new(cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64) -> Result<Self> {
        let shape = cfg.env.observation_shape();
        let n = cfg.env.action_space().size();
        Ok(match algorithm {
            Algorithm::Random => TrainedAgent::Random(RandomAgent { num_actions: n }),
            Algorithm::Bandit => TrainedAgent::Bandit(BanditAgent::new(n, cfg.bandit.exploration)),
            Algorithm::Dqn => TrainedAgent::Dqn(Box::new(DqnAgent::new(shape, n, cfg.dqn.clone(), seed)?)),
            Algorithm::VanillaPpo => TrainedAgent::VanillaPpo(Box::new(vanilla_ppo_agent(shape, n, cfg.ppo_for_run(), seed)?)),
            Algorithm::PpoGru => TrainedAgent::PpoGru(Box::new(PpoAgent::recurrent(shape, n, cfg.ppo_for_run(), seed)?)),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedAgent::Random(_) => Algorithm::Random,
            TrainedAgent::Bandit(_) => Algorithm::Bandit,
            TrainedAgent::Dqn(_) => Algorithm::Dqn,
            TrainedAgent::VanillaPpo(_) => Algorithm::VanillaPpo,
            TrainedAgent::PpoGru(_) => Algorithm::PpoGru,
        }
    }

    /// Trains on the stream starting at `env.reset(seed)` for the configured
    /// budget. PPO agents report once per batch; the others once per
    /// `batch_size` steps so the traces line up.
    pub fn train<E, F>(&mut self, cfg: &ExperimentConfig, env: &mut E, seed: u64, on_batch: F) -> Result<Vec<BatchMetrics>>
    where
        E: Environment + ?Sized,
        F: FnMut(&BatchMetrics) -> irs_core::Result<()>,
    {
        let steps = cfg.step_budget();
        let every = cfg.ppo.batch_size;
        Ok(match self {
            TrainedAgent::Random(a) => a.train(env, seed, steps, every, on_batch)?,
            TrainedAgent::Bandit(a) => a.train(env, seed, steps, every, on_batch)?,
            TrainedAgent::Dqn(a) => a.train(env, seed, steps, every, on_batch)?,
            TrainedAgent::VanillaPpo(a) => a.train(env, seed, on_batch)?,
            TrainedAgent::PpoGru(a) => a.train(env, seed, on_batch)?,
        })
    }

    /// Deterministic evaluation policy. Only the random agent uses `seed`.
    pub fn eval_policy(&self, seed: u64) -> Box<dyn Policy> {
        match self {
            TrainedAgent::Random(a) => Box::new(a.policy(seed)),
            TrainedAgent::Bandit(a) => Box::new(a.greedy_policy()),
            TrainedAgent::Dqn(a) => Box::new(a.greedy_policy()),
            TrainedAgent::VanillaPpo(a) => Box::new(a.greedy_policy()),
            TrainedAgent::PpoGru(a) => Box::new(a.greedy_policy()),
        }
    }

    pub fn to_checkpoint(&self, seed: u64, steps: u64) -> Checkpoint {
        let mut c = Checkpoint::new(self.algorithm(), seed, steps);
        match self {
            TrainedAgent::Random(_) => {}
            TrainedAgent::Bandit(a) => {
                let s = &a.state;
                c.insert("bandit.counts", vec![s.counts().len()], s.counts().iter().map(|&n| n as f64).collect());
                c.insert("bandit.means", vec![s.means().len()], s.means().to_vec());
            }
            TrainedAgent::Dqn(a) => {
                c.store_params("online", &a.online);
                c.store_params("target", &a.target);
                c.store_normalizer(&a.normalizer);
            }
            TrainedAgent::VanillaPpo(a) => {
                c.store_params("actor", &a.actor);
                c.store_params("critic", &a.critic);
                c.store_normalizer(&a.normalizer);
            }
            TrainedAgent::PpoGru(a) => {
                c.store_params("actor", &a.actor);
                c.store_params("critic", &a.critic);
                c.store_normalizer(&a.normalizer);
            }
        }
        c
    }

    /// Rebuilds the agent described by `cfg` and overwrites its state from `ckpt`.
    pub fn from_checkpoint(cfg: &ExperimentConfig, ckpt: &Checkpoint) -> Result<Self> {
        let mut agent = Self::new(cfg, ckpt.algorithm, ckpt.seed)?;
        match &mut agent {
            TrainedAgent::Random(_) => {}
            TrainedAgent::Bandit(a) => {
                let counts = ckpt.tensor("bandit.counts")?.values.iter().map(|&v| v as u64).collect();
                let means = ckpt.tensor("bandit.means")?.values.clone();
                a.state = BanditState::from_parts(counts, means, cfg.bandit.exploration)?;
                if a.state.counts().len() != cfg.env.action_space().size() {
                    return Err(SimError::Checkpoint("bandit arm count differs from the action set".into()));
                }
            }
            TrainedAgent::Dqn(a) => {
                ckpt.load_params("online", &mut a.online)?;
                ckpt.load_params("target", &mut a.target)?;
                ckpt.load_normalizer(&mut a.normalizer)?;
            }
            TrainedAgent::VanillaPpo(a) => {
                ckpt.load_params("actor", &mut a.actor)?;
                ckpt.load_params("critic", &mut a.critic)?;
                ckpt.load_normalizer(&mut a.normalizer)?;
            }
            TrainedAgent::PpoGru(a) => {
                ckpt.load_params("actor", &mut a.actor)?;
                ckpt.load_params("critic", &mut a.critic)?;
                ckpt.load_normalizer(&mut a.normalizer)?;
            }
        }
        Ok(agent)
    }
}

/// `<out>/<algorithm>_seed<seed>.csv`
pub fn metrics_path(out_dir: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    out_dir.join(format!("{algorithm}_seed{seed}.csv"))
}

/// `<out>/<algorithm>_seed<seed>.json`
pub fn checkpoint_path(out_dir: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    out_dir.join(format!("{algorithm}_seed{seed}.json"))
}

/// Files and results of one training run.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub agent: TrainedAgent,
    pub trace: Vec<BatchMetrics>,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
}

/// Trains one (algorithm, seed) pair, streaming the metric trace to CSV and
/// writing the final checkpoint.
pub fn run_training(cfg: &ExperimentConfig, algorithm: Algorithm, seed: u64, out_dir: &Path) -> Result<TrainingRun> {
    cfg.validate()?;
    let mut env = IrsEnv::new(cfg.env.clone())?;
    let mut agent = TrainedAgent::new(cfg, algorithm, seed)?;
    let metrics = metrics_path(out_dir, algorithm, seed);
    let mut writer = MetricsWriter::create(&metrics)?;
    let mut write_error = None;
    let result = agent.train(cfg, &mut env, seed, |row| {
        writer.append(row).map_err(|e| {
            let msg = e.to_string();
            write_error = Some(e);
            irs_core::Error::InvalidConfig(msg)
        })
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let trace = result?;
    let checkpoint = checkpoint_path(out_dir, algorithm, seed);
    agent.to_checkpoint(seed, cfg.step_budget()).save(&checkpoint)?;
    Ok(TrainingRun {
        agent,
        trace,
        metrics_path: metrics,
        checkpoint_path: checkpoint,
    })
}

/// Greedy mean rate of `agent` over `eval_slots` slots of the held-out
/// environment seed belonging to training seed `seed`.
pub fn evaluate(cfg: &ExperimentConfig, agent: &TrainedAgent, seed: u64) -> Result<f64> {
    let eval_seed = seed.wrapping_add(cfg.experiment.eval_seed_offset);
    let mut env = IrsEnv::new(cfg.env.clone())?;
    let mut policy = agent.eval_policy(eval_seed);
    Ok(evaluate_policy(&mut env, policy.as_mut(), cfg.experiment.eval_slots, eval_seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub mean_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub rate: SeedStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBlock {
    pub n_users: usize,
    pub summary: Vec<AlgorithmSummary>,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub blocks: Vec<ComparisonBlock>,
}

impl ComparisonBlock {
    pub fn get(&self, algorithm: Algorithm) -> Option<&SeedStats> {
        self.summary.iter().find(|s| s.algorithm == algorithm).map(|s| &s.rate)
    }
}

/// The configured algorithms with `random` added if missing, without duplicates.
pub fn comparison_algorithms(cfg: &ExperimentConfig) -> Vec<Algorithm> {
    let mut algos = vec![Algorithm::Random];
    for &a in &cfg.experiment.algorithms {
        if !algos.contains(&a) {
            algos.push(a);
        }
    }
    algos
}

/// Summary rows in the order of `algorithms` from per-seed results.
pub fn summarize_runs(algorithms: &[Algorithm], runs: &[RunResult]) -> Vec<AlgorithmSummary> {
    algorithms
        .iter()
        .filter_map(|&algorithm| {
            let rates: Vec<f64> = runs.iter().filter(|r| r.algorithm == algorithm).map(|r| r.mean_rate).collect();
            (!rates.is_empty()).then(|| AlgorithmSummary {
                algorithm,
                rate: SeedStats::from_values(&rates),
            })
        })
        .collect()
}

/// Trains and evaluates every algorithm on every seed, once per configured
/// user count. Per-run files go to `<out>/users<N>/`, the summary to
/// `<out>/comparison.toml`.
pub fn run_comparison(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ComparisonSummary> {
    cfg.validate()?;
    let algorithms = comparison_algorithms(cfg);
    let mut blocks = Vec::new();
    for &n_users in &cfg.experiment.user_counts {
        let block_cfg = ExperimentConfig {
            env: EnvConfig {
                n_users,
                ..cfg.env.clone()
            },
            ..cfg.clone()
        };
        let dir = out_dir.join(format!("users{n_users}"));
        let mut runs = Vec::new();
        for &algorithm in &algorithms {
            for &seed in &cfg.experiment.seeds {
                let run = run_training(&block_cfg, algorithm, seed, &dir)?;
                runs.push(RunResult {
                    algorithm,
                    seed,
                    mean_rate: evaluate(&block_cfg, &run.agent, seed)?,
                });
            }
        }
        blocks.push(ComparisonBlock {
            n_users,
            summary: summarize_runs(&algorithms, &runs),
            runs,
        });
    }
    let summary = ComparisonSummary { blocks };
    write_toml(&out_dir.join("comparison.toml"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub size: usize,
    pub seed: u64,
    /// Mean training reward over the last 10% of batches.
    pub plateau: f64,
    /// Steps until the 5-batch smoothed reward first reaches 90% of the
    /// plateau; the full budget if it never does.
    pub convergence_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSizeSummary {
    pub size: usize,
    pub plateau: SeedStats,
    pub convergence_steps: SeedStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sizes: Vec<SweepSizeSummary>,
    pub entries: Vec<SweepEntry>,
}

impl SweepSummary {
    pub fn get(&self, size: usize) -> Option<&SweepSizeSummary> {
        self.sizes.iter().find(|s| s.size == size)
    }
}

pub fn sweep_entry(size: usize, seed: u64, trace: &[BatchMetrics]) -> Result<SweepEntry> {
    let rewards: Vec<f64> = trace.iter().map(|r| r.mean_reward).collect();
    let last = trace.last().ok_or_else(|| SimError::Invalid("empty training trace".into()))?;
    let convergence_steps = convergence_index(&rewards).map_or(last.step, |i| trace[i].step);
    Ok(SweepEntry {
        size,
        seed,
        plateau: plateau(&rewards),
        convergence_steps,
    })
}

/// Per-size statistics, sizes in order of first appearance.
pub fn summarize_sweep(entries: Vec<SweepEntry>) -> SweepSummary {
    let mut sizes: Vec<usize> = Vec::new();
    for e in &entries {
        if !sizes.contains(&e.size) {
            sizes.push(e.size);
        }
    }
    let sizes = sizes
        .into_iter()
        .map(|size| {
            let of_size: Vec<&SweepEntry> = entries.iter().filter(|e| e.size == size).collect();
            SweepSizeSummary {
                size,
                plateau: SeedStats::from_values(&of_size.iter().map(|e| e.plateau).collect::<Vec<_>>()),
                convergence_steps: SeedStats::from_values(&of_size.iter().map(|e| e.convergence_steps as f64).collect::<Vec<_>>()),
            }
        })
        .collect();
    SweepSummary { sizes, entries }
}

/// Config for PPO-GRU with an action set of `size` DFT actions.
pub fn with_action_size(cfg: &ExperimentConfig, size: usize) -> Result<ExperimentConfig> {
    let space = ActionSpace::from_size(size)?;
    Ok(ExperimentConfig {
        env: EnvConfig {
            action_half_width: space.half_width,
            ..cfg.env.clone()
        },
        ..cfg.clone()
    })
}

/// Trains PPO-GRU for each action-set size and seed. Per-run files go to
/// `<out>/actions<size>/`, the summary to `<out>/sweep.toml`.
pub fn run_action_space_sweep(cfg: &ExperimentConfig, sizes: &[usize], out_dir: &Path) -> Result<SweepSummary> {
    cfg.validate()?;
    let mut entries = Vec::new();
    for &size in sizes {
        let size_cfg = with_action_size(cfg, size)?;
        let dir = out_dir.join(format!("actions{size}"));
        for &seed in &cfg.experiment.seeds {
            let run = run_training(&size_cfg, Algorithm::PpoGru, seed, &dir)?;
            entries.push(sweep_entry(size, seed, &run.trace)?);
        }
    }
    let summary = summarize_sweep(entries);
    write_toml(&out_dir.join("sweep.toml"), &summary)?;
    Ok(summary)
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(SimError::io(dir))?;
    }
    std::fs::write(path, toml::to_string(value)?).map_err(SimError::io(path))
}
