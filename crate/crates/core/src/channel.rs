//! Scene geometry and Rician sub-channel generation.
//!
//! All three links (users->BS, users->IRS, IRS->BS) mix a unit-modulus
//! line-of-sight steering response with unit-power Gaussian scattering:
//!
//! ```text
//! H = sqrt(K/(K+1)) H_los + sqrt(1/(K+1)) H_nlos
//! ```
//!
//! There is no path loss; geometry only enters through the steering angles.
//! Users carry a single antenna, so row `k` of the user links is the conjugate
//! steering vector of the array toward user `k`.

use crate::numerics::{Complex64, ComplexMatrix};
use crate::prelude::*;
use crate::{Error, Result};
use core::f64::consts::PI;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Vec3 = [f64; 3];

/// Tolerance for accepting a direction as unit norm.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vector pointing from `from` to `to`.
pub fn unit_direction(from: &Vec3, to: &Vec3) -> Vec3 {
    let d = [to[0] - from[0], to[1] - from[1], to[2] - from[2]];
    let n = norm(&d);
    [d[0] / n, d[1] / n, d[2] / n]
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SceneGeometry {
    pub bs_position: Vec3,
    pub irs_position: Vec3,
    /// ULA axis of the base station (`e_B`).
    pub bs_array_axis: Vec3,
    /// Axis of the IRS, modelled as a ULA (`e_R`).
    pub irs_array_axis: Vec3,
    pub user_area_center: Vec3,
    pub user_area_radius: f64,
    pub user_height_range: [f64; 2],
}

impl Default for SceneGeometry {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0, 0.0],
            irs_position: [5.0, 5.0, 5.0],
            bs_array_axis: [1.0, 0.0, 0.0],
            irs_array_axis: [0.0, 1.0, 0.0],
            user_area_center: [0.0, 0.0, 0.0],
            user_area_radius: 10.0,
            user_height_range: [1.5, 1.8],
        }
    }
}

impl SceneGeometry {
    pub fn validate(&self) -> Result<()> {
        for axis in [&self.bs_array_axis, &self.irs_array_axis] {
            let n = norm(axis);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::NonUnitVector { norm: n });
            }
        }
        if !(self.user_area_radius > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "user_area_radius must be positive, got {}",
                self.user_area_radius
            )));
        }
        let [lo, hi] = self.user_height_range;
        if !(lo <= hi) {
            return Err(Error::InvalidConfig(format!(
                "empty user height range [{lo}, {hi}]"
            )));
        }
        if self.bs_position == self.irs_position {
            return Err(Error::InvalidConfig("BS and IRS are co-located".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserPositions {
    pub positions: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RicianConfig {
    pub k_factor: f64,
}

impl RicianConfig {
    /// `(LoS weight, NLoS weight)`.
    pub fn weights(&self) -> (f64, f64) {
        let k = self.k_factor;
        if k.is_infinite() {
            return (1.0, 0.0);
        }
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor >= 0.0) || self.k_factor.is_nan() {
            return Err(Error::InvalidConfig(format!(
                "Rician factor must be >= 0, got {}",
                self.k_factor
            )));
        }
        Ok(())
    }
}

/// Array sizes of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelDims {
    pub n_users: usize,
    pub n_bs_antennas: usize,
    pub n_irs_elements: usize,
}

/// The three sub-channels of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTriple {
    /// `N_K x N_B`
    pub h_ub: ComplexMatrix,
    /// `N_K x N_R`
    pub h_ur: ComplexMatrix,
    /// `N_R x N_B`
    pub h_rb: ComplexMatrix,
}

impl ChannelTriple {
    pub fn dims(&self) -> ChannelDims {
        ChannelDims {
            n_users: self.h_ub.rows(),
            n_bs_antennas: self.h_ub.cols(),
            n_irs_elements: self.h_rb.rows(),
        }
    }
}

/// Draws users uniformly over the disk (by area) with uniform heights.
pub fn sample_user_positions<R: Rng + ?Sized>(
    geometry: &SceneGeometry,
    n_users: usize,
    rng: &mut R,
) -> UserPositions {
    let [lo, hi] = geometry.user_height_range;
    let positions = (0..n_users)
        .map(|_| {
            let r = geometry.user_area_radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            let h = lo + (hi - lo) * rng.random::<f64>();
            [
                geometry.user_area_center[0] + r * theta.cos(),
                geometry.user_area_center[1] + r * theta.sin(),
                h,
            ]
        })
        .collect();
    UserPositions { positions }
}

/// `[1, e^{j pi psi}, ..., e^{j (n-1) pi psi}]` (half-wavelength ULA).
pub fn steering_vector(psi: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|m| Complex64::from_polar(1.0, PI * m as f64 * psi))
        .collect()
}

/// Inner product of an array axis with a link direction, both unit norm.
pub fn directional_cosine(array_axis: &Vec3, link_direction: &Vec3) -> Result<f64> {
    for v in [array_axis, link_direction] {
        let n = norm(v);
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::NonUnitVector { norm: n });
        }
    }
    Ok(dot(array_axis, link_direction).clamp(-1.0, 1.0))
}

/// Rank-one LoS response `v_rx v_tx^H`, shape `n_rx x n_tx`.
pub fn los_component(tx_cosine: f64, n_tx: usize, rx_cosine: f64, n_rx: usize) -> ComplexMatrix {
    let tx = steering_vector(tx_cosine, n_tx);
    let rx = steering_vector(rx_cosine, n_rx);
    ComplexMatrix::from_fn(n_rx, n_tx, |i, j| rx[i] * tx[j].conj())
}

/// I.i.d. `CN(0, 1)` entries.
pub fn sample_nlos<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let s = core::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(s * re, s * im)
    })
}

pub fn rician_mix(los: &ComplexMatrix, nlos: &ComplexMatrix, config: &RicianConfig) -> Result<ComplexMatrix> {
    if los.shape() != nlos.shape() {
        return Err(Error::DimensionMismatch {
            op: "rician_mix",
            lhs: los.shape(),
            rhs: nlos.shape(),
        });
    }
    let (w_los, w_nlos) = config.weights();
    let data = los
        .as_slice()
        .iter()
        .zip(nlos.as_slice())
        .map(|(&l, &n)| l * w_los + n * w_nlos)
        .collect();
    ComplexMatrix::from_vec(los.rows(), los.cols(), data)
}

/// Deterministic LoS parts of all three links for one set of user positions.
pub fn los_triple(geometry: &SceneGeometry, users: &UserPositions, dims: ChannelDims) -> Result<ChannelTriple> {
    let n_b = dims.n_bs_antennas;
    let n_r = dims.n_irs_elements;
    let bs_to_irs = unit_direction(&geometry.bs_position, &geometry.irs_position);
    let psi_r = directional_cosine(&geometry.irs_array_axis, &bs_to_irs)?;
    let psi_b = directional_cosine(&geometry.bs_array_axis, &bs_to_irs)?;
    let h_rb = los_component(psi_b, n_b, psi_r, n_r);

    let mut h_ub = ComplexMatrix::zeros(users.positions.len(), n_b);
    let mut h_ur = ComplexMatrix::zeros(users.positions.len(), n_r);
    for (k, user) in users.positions.iter().enumerate() {
        let to_user = unit_direction(&geometry.bs_position, user);
        let psi = directional_cosine(&geometry.bs_array_axis, &to_user)?;
        for (b, z) in steering_vector(psi, n_b).into_iter().enumerate() {
            h_ub[(k, b)] = z.conj();
        }
        let to_user = unit_direction(&geometry.irs_position, user);
        let psi = directional_cosine(&geometry.irs_array_axis, &to_user)?;
        for (i, z) in steering_vector(psi, n_r).into_iter().enumerate() {
            h_ur[(k, i)] = z.conj();
        }
    }
    Ok(ChannelTriple { h_ub, h_ur, h_rb })
}

/// Mixes fixed LoS parts with fresh NLoS draws for all three links.
pub fn mix_with_fresh_nlos<R: Rng + ?Sized>(
    los: &ChannelTriple,
    config: &RicianConfig,
    rng: &mut R,
) -> Result<ChannelTriple> {
    let mut draw = |m: &ComplexMatrix| -> Result<ComplexMatrix> {
        let nlos = sample_nlos(m.rows(), m.cols(), rng);
        rician_mix(m, &nlos, config)
    };
    Ok(ChannelTriple {
        h_ub: draw(&los.h_ub)?,
        h_ur: draw(&los.h_ur)?,
        h_rb: draw(&los.h_rb)?,
    })
}

/// One slot's channel triple for the given users.
pub fn generate_triple<R: Rng + ?Sized>(
    geometry: &SceneGeometry,
    users: &UserPositions,
    dims: ChannelDims,
    config: &RicianConfig,
    rng: &mut R,
) -> Result<ChannelTriple> {
    let los = los_triple(geometry, users, dims)?;
    mix_with_fresh_nlos(&los, config, rng)
}

/// Effective uplink channel `H_UB + H_UR diag(phi) H_RB`.
pub fn composite_channel(triple: &ChannelTriple, reflection: &[Complex64]) -> Result<ComplexMatrix> {
    let (n_k, n_b) = triple.h_ub.shape();
    let n_r = reflection.len();
    if triple.h_ur.shape() != (n_k, n_r) {
        return Err(Error::DimensionMismatch {
            op: "composite_channel",
            lhs: triple.h_ur.shape(),
            rhs: (n_k, n_r),
        });
    }
    if triple.h_rb.shape() != (n_r, n_b) {
        return Err(Error::DimensionMismatch {
            op: "composite_channel",
            lhs: triple.h_rb.shape(),
            rhs: (n_r, n_b),
        });
    }
    let mut h = triple.h_ub.clone();
    for k in 0..n_k {
        for (i, &phi) in reflection.iter().enumerate() {
            let g = triple.h_ur[(k, i)] * phi;
            for b in 0..n_b {
                h[(k, b)] += g * triple.h_rb[(i, b)];
            }
        }
    }
    Ok(h)
}
