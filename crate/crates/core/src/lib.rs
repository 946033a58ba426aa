//! Block stretch-and-shrink input transformations for transfer-based
//! adversarial attacks.
//!
//! The crate provides:
//!
//! - a minimal image-tensor substrate with axis slicing, concatenation, and
//!   1-D bilinear resampling ([`tensor`]);
//! - constrained random segmentation of an image into blocks
//!   ([`segmentation`]);
//! - the block stretch-and-shrink operator with an exact transpose for
//!   gradient pullback ([`bss`]), plus lightweight baseline transforms
//!   ([`transforms`]);
//! - a momentum iterative sign-gradient attack engine ([`attack`]);
//! - a small trainable convolutional classifier with verified input gradients
//!   and dataset ingestion ([`model`]);
//! - a reproducible benchmark harness with unified number-scale sweeps
//!   ([`harness`]).
//!
//! The `bss` binary exposes the harness as a CLI.

pub mod attack;
pub mod bss;
pub mod error;
pub mod harness;
pub mod io;
pub mod model;
pub mod rng;
pub mod segmentation;
pub mod tensor;
pub mod transforms;

#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
pub use tensor::{Axis, ImageTensor};
