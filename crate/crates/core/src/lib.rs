//! Simulation and learning core for IRS-assisted TDD multi-user MIMO downlinks.
//!
//! The crate is `no_std` compatible (it needs `alloc`). With the default
//! `std` feature the float math uses the standard library; without it, enable
//! the `libm` feature.
//!
//! Module map:
//! - [`numerics`]: small dense complex linear algebra.
//! - [`channel`]: scene geometry, steering vectors and Rician sub-channels.
//! - [`phy`]: pilots, channel estimation, zero-forcing precoding, SINR and rate.
//! - [`env`]: the IRS control MDP.
//! - [`nncore`]: tensors, layers with hand-written reverse-mode gradients, Adam.
//! - [`agent`]: the recurrent PPO agent.
//! - [`baselines`]: random reflection, UCB1 bandit, double DQN and vanilla PPO.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("irs-core needs either the `std` or the `libm` feature for float math");

extern crate alloc;

mod error;
mod prelude;

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod metrics;
pub mod nncore;
pub mod numerics;
pub mod phy;
pub mod rng;
pub mod stubs;

pub use error::{Error, Result};
pub use numerics::{Complex64, ComplexMatrix};
