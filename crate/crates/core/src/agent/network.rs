//! Actor and critic networks.
//!
//! The recurrent network has one branch per state part. Each branch is a
//! tanh linear layer feeding a GRU; the two GRU outputs are summed and go
//! through a tanh linear layer and a linear head:
//!
//! ```text
//! phase   -> Linear -> tanh -> GRU --+
//!                                    +-> sum -> Linear -> tanh -> head
//! channel -> Linear -> tanh -> GRU --+
//! ```

use crate::env::Observation;
use crate::nncore::{tanh_backward_inplace, tanh_inplace, GruCell, GruSequence, Linear, Mlp, MlpCache, Parameterized, Tensor};
use crate::prelude::*;
use core::fmt::Debug;
use rand::Rng;

/// A network evaluated step by step over an observation stream, with
/// backpropagation through a whole sequence.
pub trait SequenceNet: Parameterized + Clone + Debug {
    type Hidden: Clone + PartialEq + Debug;
    type Cache;

    fn output_size(&self) -> usize;

    fn initial_hidden(&self) -> Self::Hidden;

    fn step(&self, obs: &Observation, hidden: &Self::Hidden) -> (Vec<f64>, Self::Hidden);

    /// Runs `obs` in order starting from `h0`.
    fn forward_sequence(&self, obs: &[&Observation], h0: &Self::Hidden) -> (Vec<Vec<f64>>, Self::Cache);

    /// Accumulates parameter gradients given `dL/d output` for every step.
    /// The initial hidden state is treated as a constant.
    fn backward_sequence(&mut self, cache: &Self::Cache, d_outputs: &[Vec<f64>]);

    /// Whether outputs depend on earlier steps (and so mini-batches must be
    /// contiguous sequences).
    fn is_recurrent(&self) -> bool;
}

/// Hidden state of the two GRU branches.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchHidden {
    pub phase: Vec<f64>,
    pub channel: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualBranchNet {
    pub phase_in: Linear,
    pub phase_gru: GruCell,
    pub channel_in: Linear,
    pub channel_gru: GruCell,
    pub merge: Linear,
    pub head: Linear,
}

/// Activations of a forward pass over `T` steps, all stored row-major with
/// one row per step.
#[derive(Debug, Clone, Default)]
pub struct DualBranchCache {
    phase_x: Vec<f64>,
    channel_x: Vec<f64>,
    phase_feat: Vec<f64>,
    channel_feat: Vec<f64>,
    phase_seq: GruSequence,
    channel_seq: GruSequence,
    summed: Vec<f64>,
    merged: Vec<f64>,
}

impl DualBranchNet {
    /// `head_scale` multiplies the initial head weights.
    pub fn new<R: Rng + ?Sized>(
        phase_dim: usize,
        channel_dim: usize,
        hidden: usize,
        outputs: usize,
        head_scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut head = Linear::new(hidden, outputs, rng);
        head.scale_weights(head_scale);
        Self {
            phase_in: Linear::new(phase_dim, hidden, rng),
            phase_gru: GruCell::new(hidden, hidden, rng),
            channel_in: Linear::new(channel_dim, hidden, rng),
            channel_gru: GruCell::new(hidden, hidden, rng),
            merge: Linear::new(hidden, hidden, rng),
            head,
        }
    }

    /// Every layer except the GRU recurrences runs as one batched product
    /// over the whole sequence.
    fn run(&self, obs: &[&Observation], h0: &BranchHidden) -> (Vec<f64>, DualBranchCache) {
        let phase_x: Vec<f64> = obs.iter().flat_map(|o| o.phase_part.iter().copied()).collect();
        let channel_x: Vec<f64> = obs.iter().flat_map(|o| o.channel_part.iter().copied()).collect();
        let mut phase_feat = self.phase_in.forward_batch(&phase_x);
        tanh_inplace(&mut phase_feat);
        let mut channel_feat = self.channel_in.forward_batch(&channel_x);
        tanh_inplace(&mut channel_feat);
        let phase_seq = self.phase_gru.forward_sequence(&phase_feat, &h0.phase);
        let channel_seq = self.channel_gru.forward_sequence(&channel_feat, &h0.channel);
        let summed: Vec<f64> = phase_seq.hs.iter().zip(&channel_seq.hs).map(|(a, b)| a + b).collect();
        let mut merged = self.merge.forward_batch(&summed);
        tanh_inplace(&mut merged);
        let out = self.head.forward_batch(&merged);
        let cache = DualBranchCache {
            phase_x,
            channel_x,
            phase_feat,
            channel_feat,
            phase_seq,
            channel_seq,
            summed,
            merged,
        };
        (out, cache)
    }
}

impl Parameterized for DualBranchNet {
    fn parameters(&self) -> Vec<&Tensor> {
        let mut v = self.phase_in.parameters();
        v.extend(self.phase_gru.parameters());
        v.extend(self.channel_in.parameters());
        v.extend(self.channel_gru.parameters());
        v.extend(self.merge.parameters());
        v.extend(self.head.parameters());
        v
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.phase_in.parameters_mut();
        v.extend(self.phase_gru.parameters_mut());
        v.extend(self.channel_in.parameters_mut());
        v.extend(self.channel_gru.parameters_mut());
        v.extend(self.merge.parameters_mut());
        v.extend(self.head.parameters_mut());
        v
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        let mut add = |prefix: &str, inner: Vec<String>| names.extend(inner.into_iter().map(|n| format!("{prefix}.{n}")));
        add("phase_in", self.phase_in.parameter_names());
        add("phase_gru", self.phase_gru.parameter_names());
        add("channel_in", self.channel_in.parameter_names());
        add("channel_gru", self.channel_gru.parameter_names());
        add("merge", self.merge.parameter_names());
        add("head", self.head.parameter_names());
        names
    }
}

impl SequenceNet for DualBranchNet {
    type Hidden = BranchHidden;
    type Cache = DualBranchCache;

    fn output_size(&self) -> usize {
        self.head.out_features()
    }

    fn initial_hidden(&self) -> BranchHidden {
        BranchHidden {
            phase: vec![0.0; self.phase_gru.hidden_size()],
            channel: vec![0.0; self.channel_gru.hidden_size()],
        }
    }

    fn step(&self, obs: &Observation, hidden: &BranchHidden) -> (Vec<f64>, BranchHidden) {
        let (out, cache) = self.run(&[obs], hidden);
        let next = BranchHidden {
            phase: cache.phase_seq.hidden(0).to_vec(),
            channel: cache.channel_seq.hidden(0).to_vec(),
        };
        (out, next)
    }

    fn forward_sequence(&self, obs: &[&Observation], h0: &BranchHidden) -> (Vec<Vec<f64>>, DualBranchCache) {
        let (out, cache) = self.run(obs, h0);
        (out.chunks(self.output_size()).map(<[f64]>::to_vec).collect(), cache)
    }

    fn backward_sequence(&mut self, cache: &DualBranchCache, d_outputs: &[Vec<f64>]) {
        let d_out: Vec<f64> = d_outputs.concat();
        let mut d_merged = vec![0.0; cache.merged.len()];
        self.head.backward_batch(&cache.merged, &d_out, Some(&mut d_merged));
        tanh_backward_inplace(&cache.merged, &mut d_merged);
        let mut d_sum = vec![0.0; cache.summed.len()];
        self.merge.backward_batch(&cache.summed, &d_merged, Some(&mut d_sum));

        let mut d_feat = vec![0.0; cache.phase_feat.len()];
        self.phase_gru.backward_sequence(&cache.phase_seq, &d_sum, Some(&mut d_feat));
        tanh_backward_inplace(&cache.phase_feat, &mut d_feat);
        self.phase_in.backward_batch(&cache.phase_x, &d_feat, None);

        let mut d_feat = vec![0.0; cache.channel_feat.len()];
        self.channel_gru.backward_sequence(&cache.channel_seq, &d_sum, Some(&mut d_feat));
        tanh_backward_inplace(&cache.channel_feat, &mut d_feat);
        self.channel_in.backward_batch(&cache.channel_x, &d_feat, None);
    }

    fn is_recurrent(&self) -> bool {
        true
    }
}

/// Feed-forward network over the concatenated observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    pub mlp: Mlp,
}

impl MlpNet {
    /// Two tanh hidden layers of width `hidden`.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, outputs: usize, head_scale: f64, rng: &mut R) -> Self {
        let mut mlp = Mlp::new(&[input, hidden, hidden, outputs], rng);
        mlp.output_layer_mut().scale_weights(head_scale);
        Self { mlp }
    }
}

impl Parameterized for MlpNet {
    fn parameters(&self) -> Vec<&Tensor> {
        self.mlp.parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.mlp.parameters_mut()
    }

    fn parameter_names(&self) -> Vec<String> {
        self.mlp.parameter_names()
    }
}

impl SequenceNet for MlpNet {
    type Hidden = ();
    type Cache = MlpCache;

    fn output_size(&self) -> usize {
        self.mlp.output_size()
    }

    fn initial_hidden(&self) {}

    fn step(&self, obs: &Observation, _hidden: &()) -> (Vec<f64>, ()) {
        (self.mlp.predict(&obs.flatten()), ())
    }

    fn forward_sequence(&self, obs: &[&Observation], _h0: &()) -> (Vec<Vec<f64>>, MlpCache) {
        let x: Vec<f64> = obs.iter().flat_map(|o| o.phase_part.iter().chain(&o.channel_part).copied()).collect();
        let (out, cache) = self.mlp.forward(&x);
        (out.chunks(self.output_size()).map(<[f64]>::to_vec).collect(), cache)
    }

    fn backward_sequence(&mut self, cache: &MlpCache, d_outputs: &[Vec<f64>]) {
        self.mlp.backward(cache, &d_outputs.concat());
    }

    fn is_recurrent(&self) -> bool {
        false
    }
}
