use super::init::uniform_fan_in;
use super::kernels::{add_column_sums, affine, affine_backward, matmul_nn_acc, matmul_nt, matmul_tn_acc};
use super::tensor::{Parameterized, Tensor};
use crate::prelude::*;
use crate::{Error, Result};
use rand::Rng;

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `out x in`
    pub weight: Tensor,
    /// `out`
    pub bias: Tensor,
}

impl Linear {
    /// Fan-in scaled uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(n_in: usize, n_out: usize, rng: &mut R) -> Self {
        Self {
            weight: Tensor::new(vec![n_out, n_in], uniform_fan_in(n_out, n_in, rng)).expect("shape"),
            bias: Tensor::zeros(vec![n_out]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.shape().len() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::ShapeMismatch {
                expected: vec![weight.shape().first().copied().unwrap_or(0)],
                got: bias.shape().to_vec(),
            });
        }
        Ok(Self { weight, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Scales the weights, e.g. to start a policy head near uniform.
    pub fn scale_weights(&mut self, s: f64) {
        self.weight.values_mut().iter_mut().for_each(|w| *w *= s);
    }

    /// Forward for a `[in]` vector or a `[batch, in]` matrix.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let n_in = self.in_features();
        let n_out = self.out_features();
        match x.shape() {
            [n] if *n == n_in => {
                let mut y = vec![0.0; n_out];
                self.forward_into(x.values(), &mut y);
                Ok(Tensor::vector(y))
            }
            [batch, n] if *n == n_in => {
                let y = if n_in == 0 {
                    self.bias.values().repeat(*batch)
                } else {
                    self.forward_batch(x.values())
                };
                Tensor::new(vec![*batch, n_out], y)
            }
            other => Err(Error::ShapeMismatch {
                expected: vec![n_in],
                got: other.to_vec(),
            }),
        }
    }

    #[inline]
    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        affine(self.weight.values(), Some(self.bias.values()), x, y);
    }

    /// Forward for `T` row-major samples (`x` is `T x in`), returning `T x out`.
    pub fn forward_batch(&self, x: &[f64]) -> Vec<f64> {
        let t = x.len() / self.in_features();
        let mut y = vec![0.0; t * self.out_features()];
        matmul_nt(x, self.weight.values(), Some(self.bias.values()), self.in_features(), &mut y);
        y
    }

    /// Batched [`Linear::backward`]: `x` is `T x in`, `dy` is `T x out`, and
    /// `dx`, when given, is `T x in` and accumulated into.
    pub fn backward_batch(&mut self, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        let n_in = self.in_features();
        let (w, dw) = self.weight.values_and_grad_mut();
        matmul_tn_acc(dy, x, n_in, dw);
        if let Some(dx) = dx {
            matmul_nn_acc(dy, w, n_in, dx);
        }
        add_column_sums(dy, self.bias.grad_mut());
    }

    /// Accumulates `dW`, `db` for one sample and optionally adds `W^T dy` into `dx`.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        let (w, dw) = self.weight.values_and_grad_mut();
        affine_backward(w, dw, x, dy, dx);
        for (g, &d) in self.bias.grad_mut().iter_mut().zip(dy) {
            *g += d;
        }
    }
}

impl Parameterized for Linear {
    fn parameters(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["weight".into(), "bias".into()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_zero_input() {
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 4] = 1.0;
        }
        let layer = Linear::from_parts(Tensor::new(vec![3, 3], eye).unwrap(), Tensor::zeros(vec![3])).unwrap();
        let x = Tensor::vector(vec![0.5, -1.0, 2.0]);
        assert_eq!(layer.forward(&x).unwrap(), x);

        let mut layer = Linear::new(3, 2, &mut ChaCha8Rng::seed_from_u64(0));
        layer.bias.values_mut().copy_from_slice(&[0.25, -4.0]);
        let y = layer.forward(&Tensor::zeros(vec![3])).unwrap();
        assert_eq!(y.values(), &[0.25, -4.0]);

        let batch = layer.forward(&Tensor::zeros(vec![5, 3])).unwrap();
        assert_eq!(batch.shape(), &[5, 2]);
        assert!(layer.forward(&Tensor::zeros(vec![4])).is_err());
    }

    #[test]
    fn gradient_of_sum_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut layer = Linear::new(4, 3, &mut rng);
        let x: Vec<f64> = (0..4).map(|i| 0.3 * i as f64 - 0.4).collect();
        layer.backward(&x, &[1.0; 3], None);
        let analytic = layer.weight.grad().unwrap().to_vec();

        let h = 1e-5;
        for idx in 0..12 {
            let mut plus = layer.clone();
            plus.weight.values_mut()[idx] += h;
            let mut minus = layer.clone();
            minus.weight.values_mut()[idx] -= h;
            let f = |l: &Linear| {
                let mut y = [0.0; 3];
                l.forward_into(&x, &mut y);
                y.iter().sum::<f64>()
            };
            let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
            assert!((numeric - analytic[idx]).abs() <= 1e-4 * numeric.abs().max(1e-3));
            assert!((analytic[idx] - x[idx % 4]).abs() < 1e-15);
        }
        assert_eq!(layer.bias.grad().unwrap(), &[1.0; 3]);
    }
}
