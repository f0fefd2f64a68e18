//! Dual-domain denoising autoencoder for unsupervised visual anomaly
//! detection, with the evaluation harness used to benchmark it.

pub mod autoencoder;
pub mod corruption;
pub mod dataset;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod reference;
pub mod rng;
pub mod scoring;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
