//! Experiment configuration, stored as TOML.
//!
//! Every field has a default, so an empty file describes the reference
//! scenario (two users, two BS antennas, 32 IRS elements, five actions) with
//! the reference PPO settings. Unknown keys are rejected.

use crate::error::{Result, SimError};
use irs_core::baselines::DqnConfig;
use irs_core::env::{ActionSpace, EnvConfig};
use irs_core::agent::PpoHyperparams;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Algorithm {
    Random,
    Bandit,
    Dqn,
    VanillaPpo,
    PpoGru,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Random,
        Algorithm::Bandit,
        Algorithm::Dqn,
        Algorithm::VanillaPpo,
        Algorithm::PpoGru,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::Bandit => "bandit",
            Algorithm::Dqn => "dqn",
            Algorithm::VanillaPpo => "vanilla_ppo",
            Algorithm::PpoGru => "ppo_gru",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| SimError::Invalid(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    /// UCB1 exploration weight.
    pub exploration: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            exploration: std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub seeds: Vec<u64>,
    /// Training budget in environment steps unless `full_budget` is set.
    pub desk_steps: u64,
    /// Train for `ppo.total_steps` instead of `desk_steps`.
    pub full_budget: bool,
    /// Slots per greedy evaluation.
    pub eval_slots: u64,
    /// Evaluation for training seed `s` runs on environment seed `s + eval_seed_offset`.
    pub eval_seed_offset: u64,
    pub out_dir: PathBuf,
    /// Algorithms for `compare`; `random` is always added.
    pub algorithms: Vec<Algorithm>,
    /// Action-set sizes for `sweep-actions`.
    pub action_sizes: Vec<usize>,
    /// User counts for `compare`, one summary block each.
    pub user_counts: Vec<usize>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            desk_steps: 200_000,
            full_budget: false,
            eval_slots: 10_000,
            eval_seed_offset: 1_000_000,
            out_dir: PathBuf::from("runs"),
            algorithms: vec![Algorithm::Random, Algorithm::Bandit, Algorithm::Dqn, Algorithm::VanillaPpo, Algorithm::PpoGru],
            action_sizes: vec![3, 5, 11],
            user_counts: vec![2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub ppo: PpoHyperparams,
    pub dqn: DqnConfig,
    pub bandit: BanditConfig,
    pub experiment: ExperimentSettings,
}

impl ExperimentConfig {
    /// Environment steps each training run consumes.
    pub fn step_budget(&self) -> u64 {
        if self.experiment.full_budget {
            self.ppo.total_steps
        } else {
            self.experiment.desk_steps
        }
    }

    /// PPO settings with `total_steps` set to the active budget.
    pub fn ppo_for_run(&self) -> PpoHyperparams {
        PpoHyperparams {
            total_steps: self.step_budget(),
            ..self.ppo.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.ppo.validate()?;
        self.ppo_for_run().validate()?;
        self.dqn.validate()?;
        let e = &self.experiment;
        let fail = |m: String| Err(SimError::Invalid(m));
        if e.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if e.eval_slots == 0 {
            return fail("eval_slots must be >= 1".into());
        }
        if !(self.bandit.exploration >= 0.0) {
            return fail("bandit exploration must be >= 0".into());
        }
        for &size in &e.action_sizes {
            ActionSpace::from_size(size)?;
        }
        if e.user_counts.contains(&0) {
            return fail("user_counts must be >= 1".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(SimError::io(path))?;
        let cfg = Self::from_toml_str(&text).map_err(|source| SimError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(SimError::io(path))
    }
}
