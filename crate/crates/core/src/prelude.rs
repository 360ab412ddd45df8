#[cfg(not(feature = "std"))]
pub use num_traits::Float;

pub use alloc::{
    format,
    string::String,
    vec,
    vec::Vec,
};
