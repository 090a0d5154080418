//! Plant-disease leaf classifier built from a small Vision Transformer whose
//! class-token feature is fused with the image's Green Chromatic Coordinate
//! (GCC) and classified by an L2-regularized linear head, plus post-training
//! int8 dynamic-range quantization of the trained model.
//!
//! Runnable walkthroughs of each capability live in `examples/`:
//!
//! ```bash
//! cargo run --release --example gcc_features
//! cargo run --release --example train_synthetic
//! ```
//!
//! # Modules
//!
//! - [`tensor`]: dense `f32` tensors, primitives and the reverse-mode tape
//! - [`chromatic`]: RGB planes, GCC and GCC box-plot statistics
//! - [`vit`]: patch embedding and pre-norm transformer encoder
//! - [`classifier`]: GCC fusion, dense + SVM head, smoothed loss
//! - [`model`]: the assembled model and its forward pass
//! - [`training`]: datasets, augmentation, stratified split, Adam, metrics
//! - [`quantize`]: int8 weights and dynamic int8 activations
//! - [`model_io`]: binary model container and dataset directory ingestion
//! - [`config`]: `key = value` run configuration
//! - [`cli`]: the `gccvit` command line

pub mod backend;
pub mod chromatic;
pub mod classifier;
pub mod cli;
pub mod config;
pub mod error;
pub mod model;
pub mod model_io;
mod params;
pub mod quantize;
pub mod synthetic;
pub mod tensor;
pub mod training;
pub mod vit;

pub use error::{Error, Result};
