//! JSON checkpoints: named parameter tensors plus observation statistics.
//!
//! Checkpoints carry what evaluation needs. Optimizer moments and replay
//! contents are not stored.

use crate::config::Algorithm;
use crate::error::{Result, SimError};
use irs_core::agent::{RunningNormalizer, RunningStats};
use irs_core::nncore::Parameterized;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredStats {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl From<&RunningStats> for StoredStats {
    fn from(s: &RunningStats) -> Self {
        Self {
            count: s.count(),
            mean: s.mean().to_vec(),
            m2: s.m2().to_vec(),
        }
    }
}

impl StoredStats {
    fn restore(&self) -> Result<RunningStats> {
        if self.mean.len() != self.m2.len() {
            return Err(SimError::Checkpoint("normalizer mean and m2 lengths differ".into()));
        }
        Ok(RunningStats::from_parts(self.count, self.mean.clone(), self.m2.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredNormalizer {
    pub phase: StoredStats,
    pub channel: StoredStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub steps: u64,
    pub tensors: BTreeMap<String, StoredTensor>,
    pub normalizer: Option<StoredNormalizer>,
}

impl Checkpoint {
    pub fn new(algorithm: Algorithm, seed: u64, steps: u64) -> Self {
        Self {
            algorithm,
            seed,
            steps,
            tensors: BTreeMap::new(),
            normalizer: None,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) {
        self.tensors.insert(name.into(), StoredTensor { shape, values });
    }

    /// Stores every parameter of `net` under `prefix.<name>`.
    pub fn store_params<P: Parameterized + ?Sized>(&mut self, prefix: &str, net: &P) {
        for (name, t) in net.parameter_names().into_iter().zip(net.parameters()) {
            self.insert(format!("{prefix}.{name}"), t.shape().to_vec(), t.values().to_vec());
        }
    }

    /// Overwrites every parameter of `net` from `prefix.<name>`; shapes must match.
    pub fn load_params<P: Parameterized + ?Sized>(&self, prefix: &str, net: &mut P) -> Result<()> {
        let names = net.parameter_names();
        for (name, t) in names.into_iter().zip(net.parameters_mut()) {
            let key = format!("{prefix}.{name}");
            let stored = self.tensor(&key)?;
            if stored.shape != t.shape() {
                return Err(SimError::Checkpoint(format!("{key}: shape {:?} vs {:?}", stored.shape, t.shape())));
            }
            t.values_mut().copy_from_slice(&stored.values);
        }
        Ok(())
    }

    pub fn tensor(&self, key: &str) -> Result<&StoredTensor> {
        let t = self
            .tensors
            .get(key)
            .ok_or_else(|| SimError::Checkpoint(format!("missing tensor {key}")))?;
        if t.shape.iter().product::<usize>() != t.values.len() {
            return Err(SimError::Checkpoint(format!("{key}: shape and value count disagree")));
        }
        Ok(t)
    }

    pub fn store_normalizer(&mut self, n: &RunningNormalizer) {
        self.normalizer = Some(StoredNormalizer {
            phase: (&n.phase).into(),
            channel: (&n.channel).into(),
        });
    }

    pub fn load_normalizer(&self, n: &mut RunningNormalizer) -> Result<()> {
        let stored = self
            .normalizer
            .as_ref()
            .ok_or_else(|| SimError::Checkpoint("missing normalizer".into()))?;
        let phase = stored.phase.restore()?;
        let channel = stored.channel.restore()?;
        if phase.dim() != n.phase.dim() || channel.dim() != n.channel.dim() {
            return Err(SimError::Checkpoint("normalizer dimensions differ from the environment".into()));
        }
        n.phase = phase;
        n.channel = channel;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(SimError::io(dir))?;
        }
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(SimError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(SimError::io(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}
