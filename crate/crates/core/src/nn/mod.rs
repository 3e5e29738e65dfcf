//! Minimal reverse-mode stack: layers with cached activations, Adam, a
//! finite-difference gradient checker and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod tensor;

pub use adam::{AdamConfig, AdamState, LrSchedule};
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckOutcome, GradCheckReport, Parameterized};
pub use layers::{Init, Layer, Mode};
pub use network::{LayerSpec, Network, NetworkBuilder, NetworkState};
pub use tensor::Tensor;
