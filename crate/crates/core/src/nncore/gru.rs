use super::init::{orthogonal, uniform_fan_in};
use super::kernels::{add_column_sums, affine, axpy, dot, matmul_nn_acc, matmul_nt, matmul_tn_acc, matmul_tn_acc_cols, sigmoid};
use super::tensor::{Parameterized, Tensor};
use crate::prelude::*;
use crate::{Error, Result};
use rand::Rng;

/// Gated recurrent unit.
///
/// ```text
/// z  = sigmoid(W_z x + U_z h + b_z)
/// r  = sigmoid(W_r x + U_r h + b_r)
/// n  = tanh(W_n x + U_n (r * h) + b_n)
/// h' = (1 - z) * h + z * n
/// ```
///
/// Gate blocks are stacked in the order `z, r, n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    /// `3H x I`
    pub w: Tensor,
    /// `3H x H`
    pub u: Tensor,
    /// `3H`
    pub b: Tensor,
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub rh: Vec<f64>,
}

/// Activations of a whole unrolled sequence; every field is `T x H`
/// row-major except `xs` (`T x I`).
#[derive(Debug, Clone, Default)]
pub struct GruSequence {
    pub xs: Vec<f64>,
    pub h0: Vec<f64>,
    pub hs: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub rh: Vec<f64>,
}

impl GruSequence {
    pub fn len(&self) -> usize {
        if self.h0.is_empty() {
            0
        } else {
            self.hs.len() / self.h0.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hidden state after step `t`.
    pub fn hidden(&self, t: usize) -> &[f64] {
        let h = self.h0.len();
        &self.hs[t * h..(t + 1) * h]
    }

    fn h_prev(&self, t: usize) -> &[f64] {
        if t == 0 {
            &self.h0
        } else {
            self.hidden(t - 1)
        }
    }
}

impl GruCell {
    /// Fan-in uniform input weights, orthogonal recurrent blocks, zero biases.
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let w = uniform_fan_in(3 * hidden_size, input_size, rng);
        let mut u = Vec::with_capacity(3 * hidden_size * hidden_size);
        for _ in 0..3 {
            u.extend(orthogonal(hidden_size, rng));
        }
        Self {
            w: Tensor::new(vec![3 * hidden_size, input_size], w).expect("shape"),
            u: Tensor::new(vec![3 * hidden_size, hidden_size], u).expect("shape"),
            b: Tensor::zeros(vec![3 * hidden_size]),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn hidden_size(&self) -> usize {
        self.u.shape()[1]
    }

    /// Tensor-level forward for a single step.
    pub fn forward(&self, x: &Tensor, h_prev: &Tensor) -> Result<Tensor> {
        x.expect_shape(&[self.input_size()])?;
        h_prev.expect_shape(&[self.hidden_size()])?;
        let (h, _) = self.step(x.values(), h_prev.values());
        Ok(Tensor::vector(h))
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruCache) {
        let hs = self.hidden_size();
        debug_assert_eq!(h_prev.len(), hs);
        let mut wx = vec![0.0; 3 * hs];
        affine(self.w.values(), Some(self.b.values()), x, &mut wx);
        let u = self.u.values();
        let mut z = vec![0.0; hs];
        let mut r = vec![0.0; hs];
        for i in 0..hs {
            z[i] = sigmoid(wx[i] + dot(&u[i * hs..(i + 1) * hs], h_prev));
            let j = hs + i;
            r[i] = sigmoid(wx[j] + dot(&u[j * hs..(j + 1) * hs], h_prev));
        }
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let mut n = vec![0.0; hs];
        let mut h = vec![0.0; hs];
        for i in 0..hs {
            let j = 2 * hs + i;
            n[i] = (wx[j] + dot(&u[j * hs..(j + 1) * hs], &rh)).tanh();
            h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * n[i];
        }
        let cache = GruCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            n,
            rh,
        };
        (h, cache)
    }

    /// Backpropagates `dh_next` through one step.
    ///
    /// Parameter gradients are accumulated; `dh_prev` is overwritten and
    /// `dx`, when given, is accumulated into.
    pub fn backward(&mut self, cache: &GruCache, dh_next: &[f64], dx: Option<&mut [f64]>, dh_prev: &mut [f64]) {
        let hs = self.hidden_size();
        let n_in = self.input_size();
        let GruCache { x, h_prev, z, r, n, rh } = cache;

        // Pre-activation gradients, stacked z, r, n.
        let mut da = vec![0.0; 3 * hs];
        for i in 0..hs {
            dh_prev[i] = dh_next[i] * (1.0 - z[i]);
            let dz = dh_next[i] * (n[i] - h_prev[i]);
            da[i] = dz * z[i] * (1.0 - z[i]);
            let dn = dh_next[i] * z[i];
            da[2 * hs + i] = dn * (1.0 - n[i] * n[i]);
        }
        let u = self.u.values();
        // d(r*h) = U_n^T da_n
        let mut drh = vec![0.0; hs];
        for i in 0..hs {
            let g = da[2 * hs + i];
            if g != 0.0 {
                let j = 2 * hs + i;
                axpy(g, &u[j * hs..(j + 1) * hs], &mut drh);
            }
        }
        for i in 0..hs {
            dh_prev[i] += drh[i] * r[i];
            let dr = drh[i] * h_prev[i];
            da[hs + i] = dr * r[i] * (1.0 - r[i]);
        }
        for i in 0..2 * hs {
            let g = da[i];
            if g != 0.0 {
                axpy(g, &u[i * hs..(i + 1) * hs], dh_prev);
            }
        }

        {
            let (_, du) = self.u.values_and_grad_mut();
            for i in 0..3 * hs {
                let g = da[i];
                if g == 0.0 {
                    continue;
                }
                let src = if i < 2 * hs { h_prev } else { rh };
                axpy(g, src, &mut du[i * hs..(i + 1) * hs]);
            }
        }
        {
            let (w, dw) = self.w.values_and_grad_mut();
            for i in 0..3 * hs {
                let g = da[i];
                if g != 0.0 {
                    axpy(g, x, &mut dw[i * n_in..(i + 1) * n_in]);
                }
            }
            if let Some(dx) = dx {
                for i in 0..3 * hs {
                    let g = da[i];
                    if g != 0.0 {
                        axpy(g, &w[i * n_in..(i + 1) * n_in], dx);
                    }
                }
            }
        }
        for (gb, &g) in self.b.grad_mut().iter_mut().zip(&da) {
            *gb += g;
        }
    }

    /// Unrolls over `T` inputs (`xs` is `T x I`) starting from `h0`. The
    /// input projections of all steps are computed in one batched product.
    pub fn forward_sequence(&self, xs: &[f64], h0: &[f64]) -> GruSequence {
        let hs = self.hidden_size();
        let ni = self.input_size();
        let t_len = xs.len() / ni;
        let mut wx = vec![0.0; t_len * 3 * hs];
        matmul_nt(xs, self.w.values(), Some(self.b.values()), ni, &mut wx);
        let u = self.u.values();
        let mut seq = GruSequence {
            xs: xs.to_vec(),
            h0: h0.to_vec(),
            hs: vec![0.0; t_len * hs],
            z: vec![0.0; t_len * hs],
            r: vec![0.0; t_len * hs],
            n: vec![0.0; t_len * hs],
            rh: vec![0.0; t_len * hs],
        };
        for t in 0..t_len {
            let (done, rest) = seq.hs.split_at_mut(t * hs);
            let h_prev = if t == 0 { h0 } else { &done[(t - 1) * hs..] };
            let h = &mut rest[..hs];
            let wx_t = &wx[t * 3 * hs..(t + 1) * 3 * hs];
            let row = t * hs..(t + 1) * hs;
            let (z, r, n, rh) = (&mut seq.z[row.clone()], &mut seq.r[row.clone()], &mut seq.n[row.clone()], &mut seq.rh[row]);
            for i in 0..hs {
                z[i] = sigmoid(wx_t[i] + dot(&u[i * hs..(i + 1) * hs], h_prev));
                let j = hs + i;
                r[i] = sigmoid(wx_t[j] + dot(&u[j * hs..(j + 1) * hs], h_prev));
                rh[i] = r[i] * h_prev[i];
            }
            for i in 0..hs {
                let j = 2 * hs + i;
                n[i] = (wx_t[j] + dot(&u[j * hs..(j + 1) * hs], rh)).tanh();
                h[i] = (1.0 - z[i]) * h_prev[i] + z[i] * n[i];
            }
        }
        seq
    }

    /// Backpropagation through time for a [`GruSequence`]. `dhs` holds the
    /// loss gradient with respect to every output state (`T x H`). Parameter
    /// gradients are accumulated, `dxs` (`T x I`) is accumulated into when
    /// given, and the gradient with respect to `h0` is returned.
    pub fn backward_sequence(&mut self, seq: &GruSequence, dhs: &[f64], dxs: Option<&mut [f64]>) -> Vec<f64> {
        let hs = self.hidden_size();
        let ni = self.input_size();
        let t_len = seq.len();
        let mut da = vec![0.0; t_len * 3 * hs];
        let mut carry = vec![0.0; hs];
        let mut dh = vec![0.0; hs];
        let mut drh = vec![0.0; hs];
        {
            let u = self.u.values();
            for t in (0..t_len).rev() {
                let h_prev = seq.h_prev(t);
                let row = t * hs..(t + 1) * hs;
                let (z, r, n) = (&seq.z[row.clone()], &seq.r[row.clone()], &seq.n[row.clone()]);
                let da_t = &mut da[t * 3 * hs..(t + 1) * 3 * hs];
                for i in 0..hs {
                    dh[i] = dhs[t * hs + i] + carry[i];
                    carry[i] = dh[i] * (1.0 - z[i]);
                    da_t[i] = dh[i] * (n[i] - h_prev[i]) * z[i] * (1.0 - z[i]);
                    da_t[2 * hs + i] = dh[i] * z[i] * (1.0 - n[i] * n[i]);
                }
                drh.fill(0.0);
                for i in 0..hs {
                    let g = da_t[2 * hs + i];
                    if g != 0.0 {
                        let j = 2 * hs + i;
                        axpy(g, &u[j * hs..(j + 1) * hs], &mut drh);
                    }
                }
                for i in 0..hs {
                    carry[i] += drh[i] * r[i];
                    da_t[hs + i] = drh[i] * h_prev[i] * r[i] * (1.0 - r[i]);
                }
                for i in 0..2 * hs {
                    let g = da_t[i];
                    if g != 0.0 {
                        axpy(g, &u[i * hs..(i + 1) * hs], &mut carry);
                    }
                }
            }
        }
        {
            let mut h_prev = Vec::with_capacity(t_len * hs);
            h_prev.extend_from_slice(&seq.h0);
            h_prev.extend_from_slice(&seq.hs[..t_len.saturating_sub(1) * hs]);
            let du = self.u.grad_mut();
            let (du_zr, du_n) = du.split_at_mut(2 * hs * hs);
            matmul_tn_acc_cols(&da, 3 * hs, 0, &h_prev, hs, du_zr);
            matmul_tn_acc_cols(&da, 3 * hs, 2 * hs, &seq.rh, hs, du_n);
        }
        let (w, dw) = self.w.values_and_grad_mut();
        matmul_tn_acc(&da, &seq.xs, ni, dw);
        if let Some(dxs) = dxs {
            matmul_nn_acc(&da, w, ni, dxs);
        }
        add_column_sums(&da, self.b.grad_mut());
        carry
    }

    pub fn from_parts(w: Tensor, u: Tensor, b: Tensor) -> Result<Self> {
        let h = u.shape().get(1).copied().unwrap_or(0);
        if u.shape() != [3 * h, h] || w.shape().len() != 2 || w.shape()[0] != 3 * h || b.shape() != [3 * h] {
            return Err(Error::ShapeMismatch {
                expected: vec![3 * h, h],
                got: u.shape().to_vec(),
            });
        }
        Ok(Self { w, u, b })
    }
}

impl Parameterized for GruCell {
    fn parameters(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.u, &self.b]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.u, &mut self.b]
    }

    fn parameter_names(&self) -> Vec<String> {
        vec!["w".into(), "u".into(), "b".into()]
    }
}
