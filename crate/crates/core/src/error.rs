use crate::prelude::*;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("singular system: pivot magnitude {pivot:e} below threshold")]
    Singular { pivot: f64 },

    #[error("vector is not unit norm (norm = {norm})")]
    NonUnitVector { norm: f64 },

    #[error("action k = {k} outside action space [-{half_width}, {half_width}]")]
    ActionOutOfRange { k: i32, half_width: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("environment has not been reset")]
    Uninitialized,

    #[error("tensor shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("rollout buffer holds {len} of {capacity} records")]
    BufferNotFull { len: usize, capacity: usize },

    #[error("mini-batch of size {0} cannot be normalized")]
    MiniBatchTooSmall(usize),
}
