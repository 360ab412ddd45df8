//! Per-slot physical layer: orthogonal uplink pilots, regularized channel
//! estimation, zero-forcing precoding and the resulting downlink sum rate.
//!
//! Downlink vectors follow TDD reciprocity: user `k` sees `h_k`, the
//! conjugate of row `k` of the uplink channel, and the gain of precoder
//! column `j` at that user is `a_j^H h_k`.

use crate::channel::sample_nlos;
use crate::numerics::{conj_transpose, matmul, pseudo_inverse, solve_regularized, Complex64, ComplexMatrix};
use crate::prelude::*;
use crate::{Error, Result};
use core::f64::consts::PI;
use rand::Rng;

/// Noise and power levels of the link budget.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PhyParams {
    /// Total pilot power: `X X^H = pilot_power * I`.
    pub pilot_power: f64,
    /// Standard deviation of the uplink receiver noise (also the estimator's sigma_N).
    pub pilot_noise_sigma: f64,
    /// Per-user downlink noise variance sigma_k^2.
    pub downlink_noise_var: f64,
    /// Per-user downlink transmit power.
    pub tx_power: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            pilot_power: 1.0,
            pilot_noise_sigma: 1.0,
            downlink_noise_var: 1.0,
            tx_power: 1.0,
        }
    }
}

impl PhyParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, strict: bool| {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} out of range: {v}")))
            }
        };
        check("pilot_power", self.pilot_power, true)?;
        check("pilot_noise_sigma", self.pilot_noise_sigma, false)?;
        check("downlink_noise_var", self.downlink_noise_var, true)?;
        check("tx_power", self.tx_power, true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    /// `N_K x N_K`, rows are the users' pilot sequences.
    pub x: ComplexMatrix,
    /// Power of each pilot symbol, `|x_ij|^2`.
    pub per_symbol_power: f64,
}

/// ZF precoder, `N_B x N_K` with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub a: ComplexMatrix,
}

/// Scaled unitary DFT pilots.
pub fn make_orthogonal_pilots(n_users: usize, power: f64) -> PilotMatrix {
    let n = n_users as f64;
    let amp = (power / n).sqrt();
    let x = ComplexMatrix::from_fn(n_users, n_users, |i, j| {
        let angle = -2.0 * PI * ((i * j) % n_users) as f64 / n;
        Complex64::from_polar(amp, angle)
    });
    PilotMatrix {
        x,
        per_symbol_power: power / n,
    }
}

/// `Y = X H + N` with `CN(0, noise_sigma^2)` noise.
pub fn uplink_receive<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    pilots: &PilotMatrix,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    let clean = matmul(&pilots.x, h)?;
    if noise_sigma == 0.0 {
        return Ok(clean);
    }
    let noise = sample_nlos(clean.rows(), clean.cols(), rng).scale_real(noise_sigma);
    clean.add(&noise)
}

/// Regularized pilot inversion.
///
/// With pilots multiplying from the left (`Y = X H + N`) the estimator
/// `Y X^H (X X^H + s^2 I)^-1` is applied to the conjugate-transposed model
/// `Y^H = H^H X^H + N^H`, which gives
/// `H_hat^H = Y^H X (X^H X + s^2 I)^-1`.
pub fn mmse_estimate(y: &ComplexMatrix, pilots: &PilotMatrix, noise_sigma: f64) -> Result<ComplexMatrix> {
    let x = &pilots.x;
    let gram = matmul(&conj_transpose(x), x)?;
    let rhs = matmul(&conj_transpose(y), x)?;
    let h_hat_h = solve_regularized(&gram, &rhs, noise_sigma * noise_sigma)?;
    Ok(conj_transpose(&h_hat_h))
}

/// Zero-forcing precoder from the channel estimate, column-normalized.
pub fn zf_precoder(h_hat: &ComplexMatrix) -> Result<Precoder> {
    let mut w = pseudo_inverse(h_hat)?;
    for j in 0..w.cols() {
        let norm = (0..w.rows()).map(|i| w[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if !(norm > crate::numerics::PIVOT_THRESHOLD) {
            return Err(Error::Singular { pivot: norm });
        }
        for i in 0..w.rows() {
            w[(i, j)] /= norm;
        }
    }
    Ok(Precoder { a: w })
}

/// Downlink vector of user `k`: conjugate of row `k` of the uplink channel.
pub fn downlink_vector(h: &ComplexMatrix, k: usize) -> Vec<Complex64> {
    h.row(k).iter().map(|z| z.conj()).collect()
}

/// `a_j^H h_k` for every `(j, k)`, indexed `[k][j]`.
fn gains(precoder: &Precoder, h_true: &ComplexMatrix) -> Vec<Vec<Complex64>> {
    let a = &precoder.a;
    (0..h_true.rows())
        .map(|k| {
            let hk = downlink_vector(h_true, k);
            (0..a.cols())
                .map(|j| (0..a.rows()).map(|b| a[(b, j)].conj() * hk[b]).sum())
                .collect()
        })
        .collect()
}

pub fn sinr_per_user(
    precoder: &Precoder,
    h_true: &ComplexMatrix,
    noise_vars: &[f64],
    tx_power: f64,
) -> Result<Vec<f64>> {
    let (n_b, n_k) = precoder.a.shape();
    if h_true.shape() != (n_k, n_b) || noise_vars.len() != n_k {
        return Err(Error::DimensionMismatch {
            op: "sinr_per_user",
            lhs: (n_b, n_k),
            rhs: h_true.shape(),
        });
    }
    let g = gains(precoder, h_true);
    Ok((0..n_k)
        .map(|k| {
            let signal = tx_power * g[k][k].norm_sqr();
            let interference: f64 = (0..n_k)
                .filter(|&j| j != k)
                .map(|j| g[k][j].norm_sqr())
                .sum();
            signal / (tx_power * interference + noise_vars[k])
        })
        .collect())
}

/// Sum of `log2(1 + SINR_k)` in bit/s/Hz.
pub fn sum_rate(sinrs: &[f64]) -> f64 {
    sinrs.iter().map(|&s| (1.0 + s).log2()).sum()
}

/// Outcome of the downlink part of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkOutcome {
    pub rate: f64,
    pub sinrs: Vec<f64>,
    /// The estimate was numerically rank deficient; rate is 0.
    pub outage: bool,
}

/// ZF on the estimate, SINR on the true channel, summed rate.
pub fn downlink_rate(h_true: &ComplexMatrix, h_hat: &ComplexMatrix, params: &PhyParams) -> Result<DownlinkOutcome> {
    let precoder = match zf_precoder(h_hat) {
        Ok(p) => p,
        Err(Error::Singular { .. }) => {
            return Ok(DownlinkOutcome {
                rate: 0.0,
                sinrs: vec![0.0; h_true.rows()],
                outage: true,
            })
        }
        Err(e) => return Err(e),
    };
    let noise = vec![params.downlink_noise_var; h_true.rows()];
    let sinrs = sinr_per_user(&precoder, h_true, &noise, params.tx_power)?;
    Ok(DownlinkOutcome {
        rate: sum_rate(&sinrs),
        sinrs,
        outage: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::conj_transpose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pilots_are_orthogonal() {
        let p = make_orthogonal_pilots(1, 1.0);
        assert!((p.x[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);

        let p = make_orthogonal_pilots(2, 1.0);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let expected = [c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)];
        for (z, e) in p.x.as_slice().iter().zip(expected) {
            assert!((z - e).norm() < 1e-15);
        }
        for (n, power) in [(2, 1.0), (4, 1.0), (3, 7.5)] {
            let p = make_orthogonal_pilots(n, power);
            let g = matmul(&p.x, &conj_transpose(&p.x)).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { power } else { 0.0 };
                    assert!((g[(i, j)] - c(want, 0.0)).norm() < 1e-12);
                }
            }
            assert!((p.per_symbol_power * n as f64 - power).abs() < 1e-12);
        }
    }

    #[test]
    fn uplink_receive_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = sample_nlos(2, 3, &mut rng);
        let eye = PilotMatrix {
            x: ComplexMatrix::identity(2),
            per_symbol_power: 1.0,
        };
        assert_eq!(uplink_receive(&h, &eye, 0.0, &mut rng).unwrap(), h);
        let two = PilotMatrix {
            x: ComplexMatrix::identity(2).scale_real(2.0),
            per_symbol_power: 4.0,
        };
        assert_eq!(uplink_receive(&h, &two, 0.0, &mut rng).unwrap(), h.scale_real(2.0));

        let pilots = make_orthogonal_pilots(2, 1.0);
        let clean = matmul(&pilots.x, &h).unwrap();
        let sigma = 0.7;
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let y = uplink_receive(&h, &pilots, sigma, &mut rng).unwrap();
            acc += y.sub(&clean).unwrap().frobenius_norm().powi(2);
        }
        let per_entry = acc / (draws as f64 * 6.0);
        assert!((per_entry / (sigma * sigma) - 1.0).abs() < 0.02);
    }

    #[test]
    fn estimate_is_exact_without_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for n_k in 1..=4 {
            let h = sample_nlos(n_k, 3, &mut rng);
            let pilots = make_orthogonal_pilots(n_k, 1.0);
            let y = uplink_receive(&h, &pilots, 0.0, &mut rng).unwrap();
            let h_hat = mmse_estimate(&y, &pilots, 0.0).unwrap();
            assert!(h_hat.sub(&h).unwrap().frobenius_norm() < 1e-10);
        }
    }

    #[test]
    fn estimate_shrinks_with_unit_regularization() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = sample_nlos(2, 2, &mut rng);
        let eye = PilotMatrix {
            x: ComplexMatrix::identity(2),
            per_symbol_power: 1.0,
        };
        let h_hat = mmse_estimate(&h, &eye, 1.0).unwrap();
        assert!(h_hat.sub(&h.scale_real(0.5)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn estimation_error_falls_with_pilot_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut mses = Vec::new();
        for power in [1.0, 10.0, 100.0] {
            let pilots = make_orthogonal_pilots(2, power);
            let mut acc = 0.0;
            for _ in 0..1000 {
                let h = sample_nlos(2, 2, &mut rng);
                let y = uplink_receive(&h, &pilots, 1.0, &mut rng).unwrap();
                let h_hat = mmse_estimate(&y, &pilots, 1.0).unwrap();
                acc += h_hat.sub(&h).unwrap().frobenius_norm().powi(2);
            }
            mses.push(acc / 1000.0);
        }
        assert!(mses[0] > mses[1] && mses[1] > mses[2], "{mses:?}");
    }

    #[test]
    fn zf_precoder_cases() {
        let eye = ComplexMatrix::identity(2);
        assert!(zf_precoder(&eye).unwrap().a.sub(&eye).unwrap().max_abs() < 1e-15);
        assert!(zf_precoder(&eye.scale_real(3.0)).unwrap().a.sub(&eye).unwrap().max_abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..100 {
            let h = sample_nlos(2, 2, &mut rng);
            let p = zf_precoder(&h).unwrap();
            for j in 0..2 {
                let col = p.a.column(j);
                let n: f64 = col.iter().map(|z| z.norm_sqr()).sum();
                assert!((n - 1.0).abs() < 1e-10);
                for k in 0..2 {
                    if j == k {
                        continue;
                    }
                    let hk = downlink_vector(&h, k);
                    let cross: Complex64 = col.iter().zip(&hk).map(|(a, h)| a.conj() * h).sum();
                    assert!(cross.norm() < 1e-9);
                }
            }
        }

        let singular = ComplexMatrix::from_fn(2, 2, |_, _| c(1.0, 0.0));
        assert!(matches!(zf_precoder(&singular), Err(Error::Singular { .. })));
    }

    #[test]
    fn zf_direction_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let h = sample_nlos(2, 3, &mut rng);
        let a = zf_precoder(&h).unwrap().a;
        let b = zf_precoder(&h.scale(c(-2.0, 0.5))).unwrap().a;
        for j in 0..2 {
            let inner: Complex64 = (0..3).map(|i| a[(i, j)].conj() * b[(i, j)]).sum();
            assert!((inner.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sinr_cases() {
        let single = Precoder {
            a: ComplexMatrix::identity(1),
        };
        let h = ComplexMatrix::from_vec(1, 1, vec![c(0.0, 2.0)]).unwrap();
        assert_eq!(sinr_per_user(&single, &h, &[1.0], 1.0).unwrap(), vec![4.0]);

        let eye = ComplexMatrix::identity(2);
        let p = zf_precoder(&eye).unwrap();
        let s = sinr_per_user(&p, &eye, &[1.0, 1.0], 1.0).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sinr_matches_scalar_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for _ in 0..20 {
            let h = sample_nlos(2, 2, &mut rng);
            let a = sample_nlos(2, 2, &mut rng);
            let p = Precoder { a: a.clone() };
            let noise = [0.4, 1.3];
            let got = sinr_per_user(&p, &h, &noise, 2.0).unwrap();
            for k in 0..2 {
                // a_j^H h_k = conj(sum_b a[b, j] H[k, b])
                let g = |j: usize| (a[(0, j)] * h[(k, 0)] + a[(1, j)] * h[(k, 1)]).norm_sqr();
                let want = 2.0 * g(k) / (2.0 * g(1 - k) + noise[k]);
                assert!((got[k] - want).abs() <= 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn sum_rate_cases() {
        assert!((sum_rate(&[1.0, 3.0]) - 3.0).abs() < 1e-15);
        assert_eq!(sum_rate(&[0.0, 0.0]), 0.0);
        assert!((sum_rate(&[4.0]) - 2.321_928_094_887_362).abs() < 1e-12);
    }

    #[test]
    fn outage_on_singular_estimate() {
        let h = ComplexMatrix::identity(2);
        let rank_one = ComplexMatrix::from_fn(2, 2, |_, _| c(1.0, 0.0));
        let out = downlink_rate(&h, &rank_one, &PhyParams::default()).unwrap();
        assert!(out.outage);
        assert_eq!(out.rate, 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sum_rate_is_monotone(s in proptest::collection::vec(0.0f64..100.0, 1..5), idx in 0usize..5, bump in 0.0f64..10.0) {
                let mut t = s.clone();
                let i = idx % t.len();
                t[i] += bump;
                prop_assert!(sum_rate(&t) >= sum_rate(&s));
            }
        }
    }
}
