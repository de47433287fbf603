//! Learn the latent structure of a ratings dataset with dot-product matrix
//! factorization, fit a GAN to the resulting dense samples, and turn generated
//! samples back into a sparse synthetic ratings dataset of any chosen shape.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod dataset;
pub mod deepmf;
pub mod discretize;
pub mod error;
pub mod evaluate;
pub mod gan;
pub mod nn;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
pub use rng::Rng;
