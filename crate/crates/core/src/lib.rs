//! Class-conditioned human action generation.
//!
//! An autoencoder maps skeleton frames to a low-dimensional latent space; a
//! conditional GAN generates whole latent sequences from noise, an initial
//! pose code and a one-hot class label; the decoder turns generated latent
//! sequences back into poses. Everything down to the reverse-mode autodiff is
//! implemented here in `f64`.

pub mod analysis;
pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod generation;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod training;

pub use autodiff::{Activation, Graph, Var};
pub use error::{Error, Result};
pub use tensor::Tensor;
