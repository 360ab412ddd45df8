//! Minimal differentiable core for the policy and value networks.
//!
//! Layers cache what they need during the forward pass and accumulate
//! parameter gradients in reverse order through explicit `backward` calls.
//! Everything is `f64`.

mod adam;
mod categorical;
mod gru;
mod init;
mod kernels;
mod linear;
mod mlp;
mod tensor;

pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use categorical::{
    argmax, entropy, entropy_grad_logits, log_softmax, sample_index, softmax, softmax_categorical, CategoricalSample,
};
pub use gru::{GruCache, GruCell, GruSequence};
pub use init::{orthogonal, uniform_fan_in};
pub use kernels::{dot, tanh_backward_inplace, tanh_inplace};
pub use linear::Linear;
pub use mlp::{Mlp, MlpCache};
pub use tensor::{Parameterized, Tensor};
