//! Texture features, capacity bounds and intrinsic-dimension tools for
//! studying how small the effective feature space of image data is.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod counting;
pub mod error;
pub mod geometry;
pub mod idim;
pub mod pipeline;
pub mod texture;

pub use error::{Error, Result};
