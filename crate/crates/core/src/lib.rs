//! Efficient pyramid super-resolution network.
//!
//! The crate is organised bottom-up:
//! - [`tensor`]: NCHW tensors, the operator set, reverse-mode differentiation
//!   and a finite-difference oracle.
//! - [`model`]: network configuration, parameters, forward graph and
//!   complexity accounting.
//! - [`train`]: L1 objective, Adam, weight averaging, patch sampling and the
//!   training loop.
//! - [`metrics`]: image files, bicubic resampling, luma conversion, PSNR and SSIM.
//! - [`cli`]: the `train` / `eval` / `upscale` / `analyze` workflows.

pub mod cli;
pub mod error;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Shape, Tensor};
