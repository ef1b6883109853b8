//! Contrastive neural topic modelling without `std`.
//!
//! A VAE topic model whose objective adds a contrastive term over positive
//! and negative documents built by copying reconstructed word weights into
//! the input at the least and most important tokens. Evaluation covers NPMI
//! coherence, Jensen-Shannon topic alignment and Welch's t-test.

#![no_std]
// `!(x >= 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod contrastive;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod math;
pub mod ntm;
pub mod sampler;
pub mod train;

pub use error::{Error, Result};
