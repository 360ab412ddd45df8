//! Experiment harness for the IRS control simulator: TOML configuration,
//! CSV metric traces, JSON checkpoints, training and evaluation runs, the
//! algorithm comparison and the action-set sweep.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
mod error;
pub mod harness;
pub mod metrics;
pub mod stats;

pub use config::{Algorithm, BanditConfig, ExperimentConfig, ExperimentSettings};
pub use error::{Result, SimError};
