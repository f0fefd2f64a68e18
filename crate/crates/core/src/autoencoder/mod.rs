//! Convolutional autoencoder with hand-written backpropagation.

pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod model;

pub use adam::{adam_step, AdamConfig, OptimState};
pub use checkpoint::Checkpoint;
pub use model::{Architecture, Gradients, Layer, LayerKind, LayerSpec, ModelParams, DOWNSAMPLE};
