use crate::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `out x in` weights uniform in `[-1/sqrt(in), 1/sqrt(in)]`.
pub fn uniform_fan_in<R: Rng + ?Sized>(out: usize, n_in: usize, rng: &mut R) -> Vec<f64> {
    let bound = 1.0 / (n_in.max(1) as f64).sqrt();
    (0..out * n_in).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Square `n x n` orthogonal matrix (row-major) from Gram-Schmidt on Gaussian rows.
pub fn orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for r in &rows {
                let p: f64 = r.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    rows.concat()
}
