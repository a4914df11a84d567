//! Minimal dense-tensor numerical core with reverse-mode automatic
//! differentiation, an AdamW optimizer, and gradient-verification
//! utilities.
//!
//! Everything trainable in this workspace is built on [`Tape`]: a
//! single-use record of tensor operations that can be played backwards
//! to obtain gradients. Training code instantiates the core with `f32`;
//! all finite-difference verification paths instantiate `f64`, where
//! central differences are actually trustworthy.

pub mod container;
pub mod gradcheck;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod tape;

pub use gradcheck::{grad_check, grad_check_multi, grad_check_sampled};
pub use optim::{clip_global_norm, AdamW, PiecewiseLinear};
pub use rng::RngStream;
pub use scalar::Real;
pub use tape::{Gradients, Tape, TensorId};
pub use tensor::{NumError, Tensor};
