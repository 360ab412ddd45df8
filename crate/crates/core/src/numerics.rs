//! Dense complex linear algebra for the small matrices of the PHY pipeline.
//!
//! Matrices are row-major and double precision. The largest operands are
//! `N_R x N_B` channels; solves are at most `N_K x N_K`, so everything here is
//! plain loops.

use crate::prelude::*;
use crate::{Error, Result};
use core::ops::{Index, IndexMut};

pub use num_complex::Complex64;

/// Pivots with magnitude below this are treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_vec",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// A `1 x n` matrix.
    pub fn row_vector(v: &[Complex64]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    /// An `n x 1` matrix.
    pub fn column_vector(v: &[Complex64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn zip_with(
        &self,
        other: &Self,
        op: &'static str,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix product `a * b`.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (l, &a_il) in a_row.iter().enumerate() {
            if a_il == ZERO {
                continue;
            }
            for (o, &b_lj) in out_row.iter_mut().zip(b.row(l)) {
                *o += a_il * b_lj;
            }
        }
    }
    Ok(out)
}

/// Conjugate transpose `a^H`.
pub fn conj_transpose(a: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.cols, a.rows, |i, j| a[(j, i)].conj())
}

/// Entrywise product.
pub fn hadamard(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.zip_with(b, "hadamard", |x, y| x * y)
}

pub fn diag_from_vector(v: &[Complex64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(v.len(), v.len());
    for (i, &z) in v.iter().enumerate() {
        m[(i, i)] = z;
    }
    m
}

/// Partial-pivot LU factorization `P A = L U` of a square matrix.
#[derive(Debug, Clone)]
pub struct LuDecomposition {
    n: usize,
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

impl LuDecomposition {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch {
                op: "lu",
                lhs: a.shape(),
                rhs: (a.cols, a.rows),
            });
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot < PIVOT_THRESHOLD {
                return Err(Error::Singular { pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = ONE / lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] * inv;
                lu[(i, k)] = factor;
                if factor == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Solves `A X = b` for every column of `b`.
    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.rows != self.n {
            return Err(Error::DimensionMismatch {
                op: "lu_solve",
                lhs: (self.n, self.n),
                rhs: b.shape(),
            });
        }
        let n = self.n;
        let mut x = ComplexMatrix::from_fn(n, b.cols, |i, j| b[(self.perm[i], j)]);
        for c in 0..b.cols {
            for i in 0..n {
                let mut acc = x[(i, c)];
                for k in 0..i {
                    acc -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, c)];
                for k in i + 1..n {
                    acc -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = acc / self.lu[(i, i)];
            }
        }
        Ok(x)
    }
}

/// Returns `X` with `X (a + sigma2 I) = b`.
///
/// This is the right-hand solve behind expressions like `B (A + s I)^-1`.
pub fn solve_regularized(a: &ComplexMatrix, b: &ComplexMatrix, sigma2: f64) -> Result<ComplexMatrix> {
    if a.rows != a.cols || b.cols != a.rows {
        return Err(Error::DimensionMismatch {
            op: "solve_regularized",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut m = a.clone();
    for i in 0..m.rows {
        m[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    // X M = B  <=>  M^T X^T = B^T
    let mt = ComplexMatrix::from_fn(m.cols, m.rows, |i, j| m[(j, i)]);
    let bt = ComplexMatrix::from_fn(b.cols, b.rows, |i, j| b[(j, i)]);
    let xt = LuDecomposition::new(&mt)?.solve(&bt)?;
    Ok(ComplexMatrix::from_fn(xt.cols, xt.rows, |i, j| xt[(j, i)]))
}

/// Moore-Penrose pseudo-inverse of a full-rank matrix.
///
/// Uses `(A^H A)^-1 A^H` for tall or square inputs and `A^H (A A^H)^-1` for
/// wide ones.
pub fn pseudo_inverse(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let ah = conj_transpose(a);
    if a.rows >= a.cols {
        let gram = matmul(&ah, a)?;
        LuDecomposition::new(&gram)?.solve(&ah)
    } else {
        let gram = matmul(a, &ah)?;
        solve_regularized(&gram, &ah, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn matmul_identity_and_imaginary_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random(2, 3, &mut rng);
        assert_eq!(matmul(&ComplexMatrix::identity(2), &m).unwrap(), m);

        let j = ComplexMatrix::from_vec(1, 1, vec![c(0.0, 1.0)]).unwrap();
        assert_eq!(matmul(&j, &j).unwrap()[(0, 0)], c(-1.0, 0.0));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(3, 3, &mut rng);
        let b = random(3, 3, &mut rng);
        let got = matmul(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = c(0.0, 0.0);
                for k in 0..3 {
                    acc += a.as_slice()[i * 3 + k] * b.as_slice()[k * 3 + j];
                }
                assert!((got[(i, j)] - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(
            matmul(&a, &a),
            Err(Error::DimensionMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn conj_transpose_cases() {
        let sym = ComplexMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)])
            .unwrap();
        assert_eq!(conj_transpose(&sym), sym);
        let j = ComplexMatrix::from_vec(1, 1, vec![c(0.0, 1.0)]).unwrap();
        assert_eq!(conj_transpose(&j)[(0, 0)], c(0.0, -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random(3, 2, &mut rng);
        assert_eq!(conj_transpose(&conj_transpose(&m)), m);
    }

    #[test]
    fn hadamard_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random(2, 3, &mut rng);
        let ones = ComplexMatrix::from_fn(2, 3, |_, _| ONE);
        assert_eq!(hadamard(&m, &ones).unwrap(), m);
        assert_eq!(
            hadamard(&m, &ComplexMatrix::zeros(2, 3)).unwrap(),
            ComplexMatrix::zeros(2, 3)
        );
        let u1 = ComplexMatrix::from_fn(2, 3, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..6.3)));
        let u2 = ComplexMatrix::from_fn(2, 3, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..6.3)));
        for z in hadamard(&u1, &u2).unwrap().as_slice() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
        assert!(hadamard(&m, &ComplexMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn diag_cases() {
        assert_eq!(diag_from_vector(&[ONE, ONE]), ComplexMatrix::identity(2));
        assert_eq!(diag_from_vector(&[c(0.0, 1.0)])[(0, 0)], c(0.0, 1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random(4, 1, &mut rng);
        let x = random(4, 1, &mut rng);
        let got = matmul(&diag_from_vector(v.as_slice()), &x).unwrap();
        for i in 0..4 {
            assert!((got[(i, 0)] - v[(i, 0)] * x[(i, 0)]).norm() < 1e-12);
        }
    }

    #[test]
    fn solve_regularized_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random(3, 2, &mut rng);
        let eye = ComplexMatrix::identity(2);
        assert!(max_diff(&solve_regularized(&eye, &m, 0.0).unwrap(), &m) < 1e-15);
        assert!(max_diff(&solve_regularized(&eye, &m, 1.0).unwrap(), &m.scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn solve_regularized_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut a = random(4, 4, &mut rng);
            for i in 0..4 {
                a[(i, i)] += c(4.0, 0.0);
            }
            let b = random(3, 4, &mut rng);
            let sigma2 = rng.random_range(0.0..2.0);
            let x = solve_regularized(&a, &b, sigma2).unwrap();
            let mut reg = a.clone();
            for i in 0..4 {
                reg[(i, i)] += c(sigma2, 0.0);
            }
            let resid = matmul(&x, &reg).unwrap().sub(&b).unwrap().frobenius_norm();
            assert!(resid < 1e-9 * b.frobenius_norm());
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let a = ComplexMatrix::from_vec(2, 2, vec![ONE, ONE, ONE, ONE]).unwrap();
        let b = ComplexMatrix::identity(2);
        assert!(matches!(
            solve_regularized(&a, &b, 0.0),
            Err(Error::Singular { .. })
        ));
        assert!(solve_regularized(&a, &b, 0.5).is_ok());
    }

    #[test]
    fn pseudo_inverse_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let wide = random(2, 4, &mut rng);
        let p = pseudo_inverse(&wide).unwrap();
        assert_eq!(p.shape(), (4, 2));
        assert!(max_diff(&matmul(&wide, &p).unwrap(), &ComplexMatrix::identity(2)) < 1e-10);
        let tall = random(4, 2, &mut rng);
        let p = pseudo_inverse(&tall).unwrap();
        assert!(max_diff(&matmul(&p, &tall).unwrap(), &ComplexMatrix::identity(2)) < 1e-10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
            proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols).prop_map(move |v| {
                ComplexMatrix::from_vec(rows, cols, v.into_iter().map(|(re, im)| c(re, im)).collect())
                    .unwrap()
            })
        }

        proptest! {
            #[test]
            fn matmul_is_associative(a in matrix(3, 2), b in matrix(2, 4), m in matrix(4, 3)) {
                let left = matmul(&matmul(&a, &b).unwrap(), &m).unwrap();
                let right = matmul(&a, &matmul(&b, &m).unwrap()).unwrap();
                let scale = left.frobenius_norm().max(1e-300);
                prop_assert!(left.sub(&right).unwrap().frobenius_norm() / scale < 1e-10);
            }

            #[test]
            fn conj_transpose_reverses_products(a in matrix(3, 2), b in matrix(2, 3)) {
                let lhs = conj_transpose(&matmul(&a, &b).unwrap());
                let rhs = matmul(&conj_transpose(&b), &conj_transpose(&a)).unwrap();
                prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
            }

            #[test]
            fn solve_recovers_rhs(a in matrix(3, 3), b in matrix(2, 3), sigma2 in 0.5f64..3.0) {
                // Hermitian PSD + sigma2 I keeps the condition number bounded.
                let gram = matmul(&conj_transpose(&a), &a).unwrap();
                let x = solve_regularized(&gram, &b, sigma2).unwrap();
                let mut reg = gram.clone();
                for i in 0..3 { reg[(i, i)] += c(sigma2, 0.0); }
                let back = matmul(&x, &reg).unwrap();
                let scale = b.frobenius_norm().max(1e-12);
                prop_assert!(back.sub(&b).unwrap().frobenius_norm() / scale < 1e-9);
            }
        }
    }
}
