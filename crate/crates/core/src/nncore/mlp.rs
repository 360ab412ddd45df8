use super::kernels::{tanh_backward_inplace, tanh_inplace};
use super::linear::Linear;
use super::tensor::{prefixed, Parameterized, Tensor};
use crate::prelude::*;
use rand::Rng;

/// Feed-forward stack with tanh between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Inputs and post-activation outputs of every layer, one row per sample.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self {
            layers: sizes.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].in_features()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, Linear::out_features)
    }

    pub fn output_layer_mut(&mut self) -> &mut Linear {
        self.layers.last_mut().expect("non-empty")
    }

    /// Forward for one sample or for `T` samples stacked row-major
    /// (`x.len() = T * input_size`); the output is stacked the same way.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward_batch(activations.last().unwrap());
            if i < last {
                tanh_inplace(&mut y);
            }
            activations.push(y);
        }
        let out = activations.last().unwrap().clone();
        (out, MlpCache { activations })
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).0
    }

    /// Accumulates parameter gradients for the samples in `cache`; returns
    /// `dL/dx` stacked like the input.
    pub fn backward(&mut self, cache: &MlpCache, d_out: &[f64]) -> Vec<f64> {
        let mut grad = d_out.to_vec();
        let last = self.layers.len() - 1;
        for i in (0..self.layers.len()).rev() {
            if i < last {
                tanh_backward_inplace(&cache.activations[i + 1], &mut grad);
            }
            let mut dx = vec![0.0; cache.activations[i].len()];
            self.layers[i].backward_batch(&cache.activations[i], &grad, Some(&mut dx));
            grad = dx;
        }
        grad
    }
}

impl Parameterized for Mlp {
    fn parameters(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.parameters()).collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.parameters_mut()).collect()
    }

    fn parameter_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| prefixed(&format!("layer{i}"), l.parameter_names()).collect::<Vec<_>>())
            .collect()
    }
}
