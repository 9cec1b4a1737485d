//! Neural building blocks for the deep-RL agent: multilayer perceptrons with
//! reverse-mode gradients, a bias-corrected Adam optimizer, and a replay
//! buffer. Everything is plain `f64` on flat heap buffers; there is no
//! autodiff graph beyond the fixed MLP structure, which keeps gradients easy
//! to verify against finite differences.

pub mod adam;
pub mod mlp;
pub mod replay;

pub use adam::AdamState;
pub use mlp::{mse_gradient_check, polyak_average, ForwardCache, Mlp, OutputTransform};
pub use replay::{Batch, ReplayBuffer};
