//! The IRS control MDP.
//!
//! State: real and imaginary parts of the previous IRS reflection vector and
//! of the previous channel estimate. Action: an index into a set of DFT phase
//! ramps `v(k)`, `k = -n..=n`, multiplied onto the current reflection.
//! Reward: the downlink ZF sum rate of the slot.
//!
//! Slots are one second long. Scattering is redrawn every slot; user
//! positions (and with them every LoS component) every
//! `slots_per_los_redraw` slots.

use crate::channel::{
    composite_channel, los_triple, mix_with_fresh_nlos, sample_user_positions, ChannelDims, ChannelTriple,
    RicianConfig, SceneGeometry, UserPositions,
};
use crate::numerics::{Complex64, ComplexMatrix};
use crate::phy::{downlink_rate, make_orthogonal_pilots, mmse_estimate, uplink_receive, PhyParams, PilotMatrix};
use crate::prelude::*;
use crate::rng::{substream, SimRng, Stream};
use crate::{Error, Result};
use core::f64::consts::PI;

/// Element `m` is `e^{j pi m k / n_r}`.
pub fn dft_action_vector(k: i32, n_r: usize) -> Vec<Complex64> {
    (0..n_r)
        .map(|m| Complex64::from_polar(1.0, PI * m as f64 * k as f64 / n_r as f64))
        .collect()
}

/// Unit-amplitude IRS reflection state on the `pi / N_R` phase grid.
///
/// Phases are stored as integer grid indices modulo `2 N_R`, so repeated
/// actions never drift off the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseConfig {
    levels: Vec<u32>,
}

impl PhaseConfig {
    /// All phases zero (identity reflection).
    pub fn identity(n_r: usize) -> Self {
        Self { levels: vec![0; n_r] }
    }

    pub fn from_levels(levels: Vec<u32>) -> Self {
        let modulus = 2 * levels.len() as u32;
        Self {
            levels: levels.into_iter().map(|l| l % modulus.max(1)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Grid index of each element, in `0..2 N_R`.
    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// Phases in radians, in `[0, 2 pi)`.
    pub fn phases(&self) -> Vec<f64> {
        let step = PI / self.levels.len() as f64;
        self.levels.iter().map(|&l| l as f64 * step).collect()
    }

    /// Reflection coefficients `e^{j beta_i}`.
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.phases()
            .into_iter()
            .map(|b| Complex64::new(b.cos(), b.sin()))
            .collect()
    }

    /// `Phi diag(v(k))`: element `m` advances by `m k` grid steps.
    pub fn apply_action(&self, k: i32) -> Self {
        let modulus = 2 * self.levels.len() as i64;
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(m, &l)| (l as i64 + m as i64 * k as i64).rem_euclid(modulus) as u32)
            .collect();
        Self { levels }
    }
}

/// The `2n + 1` DFT actions `k = -n..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    pub half_width: usize,
}

impl ActionSpace {
    pub fn new(half_width: usize) -> Self {
        Self { half_width }
    }

    /// Half width `n` for an odd size `2n + 1`.
    pub fn from_size(size: usize) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("action space size must be odd, got {size}")));
        }
        Ok(Self { half_width: size / 2 })
    }

    pub fn size(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn k_of(&self, index: usize) -> i32 {
        index as i32 - self.half_width as i32
    }

    pub fn index_of(&self, k: i32) -> Result<usize> {
        if k.unsigned_abs() as usize > self.half_width {
            return Err(Error::ActionOutOfRange {
                k,
                half_width: self.half_width,
            });
        }
        Ok((k + self.half_width as i32) as usize)
    }
}

/// Apply DFT action `k`, rejecting values outside the action space.
pub fn apply_action(phi: &PhaseConfig, k: i32, space: &ActionSpace) -> Result<PhaseConfig> {
    space.index_of(k)?;
    Ok(phi.apply_action(k))
}

/// MDP state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observation {
    /// `[Re(phi), Im(phi)]`, length `2 N_R`.
    pub phase_part: Vec<f64>,
    /// `[Re(H_hat), Im(H_hat)]` row-major, length `2 N_K N_B`.
    pub channel_part: Vec<f64>,
}

impl Observation {
    pub fn from_state(phi: &PhaseConfig, h_hat: &ComplexMatrix) -> Self {
        let coeffs = phi.coefficients();
        let mut phase_part: Vec<f64> = coeffs.iter().map(|z| z.re).collect();
        phase_part.extend(coeffs.iter().map(|z| z.im));
        let mut channel_part: Vec<f64> = h_hat.as_slice().iter().map(|z| z.re).collect();
        channel_part.extend(h_hat.as_slice().iter().map(|z| z.im));
        Self {
            phase_part,
            channel_part,
        }
    }

    /// Both parts concatenated.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.phase_part.clone();
        v.extend_from_slice(&self.channel_part);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.phase_part.iter().chain(&self.channel_part).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EnvConfig {
    pub n_bs_antennas: usize,
    pub n_irs_elements: usize,
    pub n_users: usize,
    pub action_half_width: usize,
    pub rician_k: f64,
    pub slots_per_los_redraw: u64,
    /// Zeroes the users->IRS link so the phase has no effect on the channel.
    pub disable_irs_link: bool,
    pub phy: PhyParams,
    pub geometry: SceneGeometry,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            n_bs_antennas: 2,
            n_irs_elements: 32,
            n_users: 2,
            action_half_width: 2,
            rician_k: 10.0,
            slots_per_los_redraw: 20,
            disable_irs_link: false,
            phy: PhyParams::default(),
            geometry: SceneGeometry::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_bs_antennas", self.n_bs_antennas),
            ("n_irs_elements", self.n_irs_elements),
            ("n_users", self.n_users),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.slots_per_los_redraw == 0 {
            return Err(Error::InvalidConfig("slots_per_los_redraw must be >= 1".into()));
        }
        self.rician().validate()?;
        self.phy.validate()?;
        self.geometry.validate()
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace::new(self.action_half_width)
    }

    pub fn dims(&self) -> ChannelDims {
        ChannelDims {
            n_users: self.n_users,
            n_bs_antennas: self.n_bs_antennas,
            n_irs_elements: self.n_irs_elements,
        }
    }

    pub fn rician(&self) -> RicianConfig {
        RicianConfig {
            k_factor: self.rician_k,
        }
    }

    /// `(phase_part length, channel_part length)`.
    pub fn observation_shape(&self) -> (usize, usize) {
        (2 * self.n_irs_elements, 2 * self.n_users * self.n_bs_antennas)
    }
}

/// Per-slot bookkeeping returned by a step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlotInfo {
    pub slot: u64,
    pub action_k: i32,
    pub reward: f64,
    pub los_epoch: u64,
    pub outage: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    pub info: SlotInfo,
}

/// Interface shared by the IRS environment and test stubs.
pub trait Environment {
    fn num_actions(&self) -> usize;

    /// `(phase_part length, channel_part length)`.
    fn observation_shape(&self) -> (usize, usize);

    fn reset(&mut self, seed: u64) -> Result<Observation>;

    /// Advance one slot with the action at `index` in `0..num_actions()`.
    fn step_action(&mut self, index: usize) -> Result<Step>;
}

/// Anything that maps observations to action indices.
pub trait Policy {
    fn reset(&mut self) {}

    fn act(&mut self, observation: &Observation) -> usize;
}

impl<F: FnMut(&Observation) -> usize> Policy for F {
    fn act(&mut self, observation: &Observation) -> usize {
        self(observation)
    }
}

/// Time-averaged reward of `policy` over `n_slots` slots after `env.reset(seed)`.
pub fn evaluate_policy<E, P>(env: &mut E, policy: &mut P, n_slots: u64, seed: u64) -> Result<f64>
where
    E: Environment + ?Sized,
    P: Policy + ?Sized,
{
    if n_slots == 0 {
        return Err(Error::InvalidConfig("n_slots must be >= 1".into()));
    }
    let mut obs = env.reset(seed)?;
    policy.reset();
    let mut total = 0.0;
    for _ in 0..n_slots {
        let step = env.step_action(policy.act(&obs))?;
        total += step.reward;
        obs = step.observation;
    }
    Ok(total / n_slots as f64)
}

#[derive(Debug, Clone)]
struct SlotState {
    rng: SimRng,
    users: UserPositions,
    los: ChannelTriple,
    triple: ChannelTriple,
    phase: PhaseConfig,
    h_true: ComplexMatrix,
    h_hat: ComplexMatrix,
    slot: u64,
    los_epoch: u64,
}

/// The IRS-assisted TDD multi-user MIMO environment.
#[derive(Debug, Clone)]
pub struct IrsEnv {
    config: EnvConfig,
    pilots: PilotMatrix,
    state: Option<SlotState>,
}

impl IrsEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let pilots = make_orthogonal_pilots(config.n_users, config.phy.pilot_power);
        Ok(Self {
            config,
            pilots,
            state: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn action_space(&self) -> ActionSpace {
        self.config.action_space()
    }

    fn fresh_triple(&self, los: &ChannelTriple, rng: &mut SimRng) -> Result<ChannelTriple> {
        let mut triple = mix_with_fresh_nlos(los, &self.config.rician(), rng)?;
        if self.config.disable_irs_link {
            triple.h_ur = ComplexMatrix::zeros(triple.h_ur.rows(), triple.h_ur.cols());
        }
        Ok(triple)
    }

    fn sense(&self, triple: &ChannelTriple, phase: &PhaseConfig, rng: &mut SimRng) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let h = composite_channel(triple, &phase.coefficients())?;
        let sigma = self.config.phy.pilot_noise_sigma;
        let y = uplink_receive(&h, &self.pilots, sigma, rng)?;
        let h_hat = mmse_estimate(&y, &self.pilots, sigma)?;
        Ok((h, h_hat))
    }

    /// Draws users and channels, sets all phases to zero, runs one pilot
    /// round and returns the first observation.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let mut rng = substream(seed, Stream::Environment);
        let users = sample_user_positions(&self.config.geometry, self.config.n_users, &mut rng);
        let los = los_triple(&self.config.geometry, &users, self.config.dims())?;
        let triple = self.fresh_triple(&los, &mut rng)?;
        let phase = PhaseConfig::identity(self.config.n_irs_elements);
        let (h_true, h_hat) = self.sense(&triple, &phase, &mut rng)?;
        let obs = Observation::from_state(&phase, &h_hat);
        self.state = Some(SlotState {
            rng,
            users,
            los,
            triple,
            phase,
            h_true,
            h_hat,
            slot: 0,
            los_epoch: 0,
        });
        Ok(obs)
    }

    /// Applies DFT action `k`, advances one slot and returns the sum-rate reward.
    pub fn step(&mut self, k: i32) -> Result<Step> {
        let space = self.config.action_space();
        let mut state = self.state.take().ok_or(Error::Uninitialized)?;
        let result = (|| {
            state.phase = apply_action(&state.phase, k, &space)?;
            state.slot += 1;
            if state.slot % self.config.slots_per_los_redraw == 0 {
                state.users = sample_user_positions(&self.config.geometry, self.config.n_users, &mut state.rng);
                state.los = los_triple(&self.config.geometry, &state.users, self.config.dims())?;
                state.los_epoch += 1;
            }
            state.triple = self.fresh_triple(&state.los, &mut state.rng)?;
            let (h_true, h_hat) = self.sense(&state.triple, &state.phase, &mut state.rng)?;
            state.h_true = h_true;
            state.h_hat = h_hat;
            let outcome = downlink_rate(&state.h_true, &state.h_hat, &self.config.phy)?;
            Ok(Step {
                observation: Observation::from_state(&state.phase, &state.h_hat),
                reward: outcome.rate,
                info: SlotInfo {
                    slot: state.slot,
                    action_k: k,
                    reward: outcome.rate,
                    los_epoch: state.los_epoch,
                    outage: outcome.outage,
                },
            })
        })();
        self.state = Some(state);
        result
    }

    fn state(&self) -> Result<&SlotState> {
        self.state.as_ref().ok_or(Error::Uninitialized)
    }

    pub fn phase(&self) -> Result<&PhaseConfig> {
        Ok(&self.state()?.phase)
    }

    /// True composite channel of the current slot.
    pub fn channel(&self) -> Result<&ComplexMatrix> {
        Ok(&self.state()?.h_true)
    }

    pub fn estimate(&self) -> Result<&ComplexMatrix> {
        Ok(&self.state()?.h_hat)
    }

    pub fn sub_channels(&self) -> Result<&ChannelTriple> {
        Ok(&self.state()?.triple)
    }

    pub fn users(&self) -> Result<&UserPositions> {
        Ok(&self.state()?.users)
    }

    pub fn slot(&self) -> Result<u64> {
        Ok(self.state()?.slot)
    }
}

impl Environment for IrsEnv {
    fn num_actions(&self) -> usize {
        self.config.action_space().size()
    }

    fn observation_shape(&self) -> (usize, usize) {
        self.config.observation_shape()
    }

    fn reset(&mut self, seed: u64) -> Result<Observation> {
        IrsEnv::reset(self, seed)
    }

    fn step_action(&mut self, index: usize) -> Result<Step> {
        let k = self.config.action_space().k_of(index);
        self.step(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{sinr_per_user, sum_rate, zf_precoder};
    use rand::{Rng, SeedableRng};

    fn env_with(f: impl FnOnce(&mut EnvConfig)) -> IrsEnv {
        let mut cfg = EnvConfig::default();
        f(&mut cfg);
        IrsEnv::new(cfg).unwrap()
    }

    #[test]
    fn dft_vector_cases() {
        assert!(dft_action_vector(0, 6).iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let v = dft_action_vector(1, 4);
        for (m, z) in v.iter().enumerate() {
            assert!((z - Complex64::from_polar(1.0, m as f64 * PI / 4.0)).norm() < 1e-15);
        }
        let plus = dft_action_vector(3, 8);
        let minus = dft_action_vector(-3, 8);
        for (a, b) in plus.iter().zip(&minus) {
            assert!((a.conj() - b).norm() < 1e-15);
        }
    }

    #[test]
    fn apply_action_cases() {
        let space = ActionSpace::new(2);
        let phi = PhaseConfig::from_levels(vec![3, 0, 7, 5]);
        assert_eq!(apply_action(&phi, 0, &space).unwrap(), phi);
        let there = apply_action(&phi, 2, &space).unwrap();
        assert_eq!(apply_action(&there, -2, &space).unwrap(), phi);

        let ramp = apply_action(&PhaseConfig::identity(4), 1, &space).unwrap();
        let expected = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
        for (p, e) in ramp.phases().iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!(matches!(
            apply_action(&phi, 3, &space),
            Err(Error::ActionOutOfRange { k: 3, .. })
        ));
    }

    #[test]
    fn action_matches_hadamard_of_coefficients() {
        let phi = PhaseConfig::from_levels(vec![1, 6, 11, 2, 9, 0]);
        let next = phi.apply_action(-2);
        let v = dft_action_vector(-2, 6);
        for ((a, b), z) in phi.coefficients().iter().zip(&v).zip(next.coefficients()) {
            assert!((a * b - z).norm() < 1e-12);
        }
    }

    #[test]
    fn action_space_indexing() {
        let space = ActionSpace::from_size(5).unwrap();
        assert_eq!(space.half_width, 2);
        assert_eq!((0..5).map(|i| space.k_of(i)).collect::<Vec<_>>(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(space.index_of(0).unwrap(), 2);
        assert!(ActionSpace::from_size(4).is_err());
        assert_eq!(ActionSpace::from_size(1).unwrap().size(), 1);
    }

    #[test]
    fn reset_cases() {
        let mut env = IrsEnv::new(EnvConfig::default()).unwrap();
        let a = env.reset(9).unwrap();
        let b = env.reset(9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.phase_part.len(), 64);
        assert_eq!(a.channel_part.len(), 8);
        assert!(a.phase_part[..32].iter().all(|&x| x == 1.0));
        assert!(a.phase_part[32..].iter().all(|&x| x == 0.0));
        assert_ne!(a, env.reset(10).unwrap());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = EnvConfig {
            n_users: 0,
            ..EnvConfig::default()
        };
        assert!(matches!(IrsEnv::new(cfg), Err(Error::InvalidConfig(_))));
        let cfg = EnvConfig {
            slots_per_los_redraw: 0,
            ..EnvConfig::default()
        };
        assert!(IrsEnv::new(cfg).is_err());
        let mut cfg = EnvConfig::default();
        cfg.geometry.bs_array_axis = [1.0, 1.0, 0.0];
        assert!(IrsEnv::new(cfg).is_err());
    }

    #[test]
    fn step_requires_reset() {
        let mut env = IrsEnv::new(EnvConfig::default()).unwrap();
        assert_eq!(env.step(0), Err(Error::Uninitialized));
    }

    #[test]
    fn rewards_are_nonnegative_and_consistent() {
        let mut env = IrsEnv::new(EnvConfig::default()).unwrap();
        env.reset(3).unwrap();
        let mut rng = SimRng::seed_from_u64(0);
        for _ in 0..200 {
            let k = rng.random_range(-2..=2);
            let step = env.step(k).unwrap();
            assert!(step.reward >= 0.0);
            // Offline recomputation from the logged channel, estimate and phase.
            let h = env.channel().unwrap();
            let h_hat = env.estimate().unwrap();
            let recomposed = composite_channel(env.sub_channels().unwrap(), &env.phase().unwrap().coefficients()).unwrap();
            assert_eq!(&recomposed, h);
            let p = zf_precoder(h_hat).unwrap();
            let rate = sum_rate(&sinr_per_user(&p, h, &[1.0, 1.0], 1.0).unwrap());
            assert!((rate - step.reward).abs() <= 1e-12 * rate.max(1.0));
            assert_eq!(Observation::from_state(env.phase().unwrap(), h_hat), step.observation);
        }
    }

    #[test]
    fn users_move_only_at_epoch_boundaries() {
        let mut env = env_with(|c| c.slots_per_los_redraw = 7);
        env.reset(4).unwrap();
        let mut prev = env.users().unwrap().clone();
        for slot in 1..=50u64 {
            let step = env.step(1).unwrap();
            let now = env.users().unwrap().clone();
            assert_eq!(step.info.slot, slot);
            assert_eq!(step.info.los_epoch, slot / 7);
            assert_eq!(now != prev, slot % 7 == 0, "slot {slot}");
            prev = now;
        }
    }

    #[test]
    fn disabled_irs_link_makes_actions_irrelevant() {
        let mut a = env_with(|c| c.disable_irs_link = true);
        let mut b = a.clone();
        a.reset(5).unwrap();
        b.reset(5).unwrap();
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..100 {
            let ra = a.step(rng.random_range(-2..=2)).unwrap().reward;
            let rb = b.step(0).unwrap().reward;
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn step_reward_bounded_by_exhaustive_phase_search() {
        // 1 user, 1 antenna, 2 IRS elements, noiseless pilots.
        let mut env = env_with(|c| {
            c.n_users = 1;
            c.n_bs_antennas = 1;
            c.n_irs_elements = 2;
            c.action_half_width = 1;
            c.phy.pilot_noise_sigma = 0.0;
        });
        for k in -1..=1 {
            env.reset(6).unwrap();
            for _ in 0..30 {
                let reward = env.step(k).unwrap().reward;
                let triple = env.sub_channels().unwrap().clone();
                let mut best = 0.0f64;
                for l0 in 0..4 {
                    for l1 in 0..4 {
                        let phi = PhaseConfig::from_levels(vec![l0, l1]);
                        let h = composite_channel(&triple, &phi.coefficients()).unwrap();
                        let rate = downlink_rate(&h, &h, &PhyParams::default()).unwrap().rate;
                        best = best.max(rate);
                    }
                }
                assert!(reward <= best + 1e-12, "{reward} > {best}");
            }
        }
    }

    struct ConstantEnv(f64);

    impl Environment for ConstantEnv {
        fn num_actions(&self) -> usize {
            3
        }
        fn observation_shape(&self) -> (usize, usize) {
            (1, 1)
        }
        fn reset(&mut self, _seed: u64) -> Result<Observation> {
            Ok(Observation {
                phase_part: vec![0.0],
                channel_part: vec![0.0],
            })
        }
        fn step_action(&mut self, index: usize) -> Result<Step> {
            Ok(Step {
                observation: self.reset(0)?,
                reward: self.0,
                info: SlotInfo {
                    slot: 0,
                    action_k: index as i32,
                    reward: self.0,
                    los_epoch: 0,
                    outage: false,
                },
            })
        }
    }

    #[test]
    fn evaluate_policy_cases() {
        let mut stub = ConstantEnv(2.5);
        assert_eq!(evaluate_policy(&mut stub, &mut |_: &Observation| 1, 17, 0).unwrap(), 2.5);

        let mut env = IrsEnv::new(EnvConfig::default()).unwrap();
        let single = evaluate_policy(&mut env, &mut |_: &Observation| 2, 1, 8).unwrap();
        env.reset(8).unwrap();
        assert_eq!(single, env.step(0).unwrap().reward);

        // Random policy on two disjoint seeds: estimates agree within Monte Carlo error.
        let mut rng = SimRng::seed_from_u64(2);
        let mut per_seed = Vec::new();
        for seed in [100, 200] {
            let mut means = Vec::new();
            for rep in 0..5 {
                let mut policy = |_: &Observation| rng.random_range(0..5usize);
                means.push(evaluate_policy(&mut env, &mut policy, 400, seed * 10 + rep).unwrap());
            }
            per_seed.push(means);
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var / v.len() as f64)
        };
        let (m0, se0) = stats(&per_seed[0]);
        let (m1, se1) = stats(&per_seed[1]);
        assert!((m0 - m1).abs() < 4.0 * (se0 + se1).sqrt(), "{m0} vs {m1}");
        assert!(evaluate_policy(&mut env, &mut |_: &Observation| 0, 0, 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn grid_closure_and_reversibility(n_r in 1usize..40, ks in proptest::collection::vec(-5i32..=5, 0..60)) {
                let mut phi = PhaseConfig::identity(n_r);
                for &k in &ks {
                    let next = phi.apply_action(k);
                    prop_assert_eq!(next.apply_action(-k), phi.clone());
                    phi = next;
                }
                let step = PI / n_r as f64;
                for (p, z) in phi.phases().iter().zip(phi.coefficients()) {
                    let ratio = p / step;
                    prop_assert!((ratio - ratio.round()).abs() < 1e-9);
                    prop_assert!((z.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
