//! Group orthogonal convolutional networks.
//!
//! The final convolution layer is split into a foreground group and a
//! background group. During training, per-sample masks gate suppression
//! losses that push each group to stay silent outside its region, and group
//! classifiers keep both groups discriminative. At test time the extra heads
//! are dropped and the model is an ordinary CNN.
//!
//! The crate also carries the pieces needed to study the effect end to end:
//! a small f64 tensor library with reverse-mode gradients, a synthetic
//! shapes-on-textures corpus with pixel-exact masks, diversity metrics over
//! channel correlations, and a training and evaluation harness.

pub mod autograd;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod diversity;
pub mod error;
pub mod harness;
pub mod losses;
pub mod model;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{Architecture, Classification, GoCnnConfig, GoCnnModel, Variant};
pub use tensor::{LayerShape, Tensor};
