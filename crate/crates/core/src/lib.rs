//! Unpaired point-cloud completion.
//!
//! Two point-set autoencoders embed clean-complete and noisy-partial clouds
//! into latent spaces; a least-squares GAN with a directed-Hausdorff
//! reconstruction term maps partial codes onto the clean manifold. The crate
//! also synthesizes training data from procedural shapes and evaluates
//! completions.

pub mod autoencoder;
pub mod config;
pub mod distance;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gan;
pub mod io;
pub mod nn;
pub mod point;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use point::{Point, PointSet};
pub use rng::Rng;
