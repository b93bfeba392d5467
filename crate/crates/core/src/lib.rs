//! Measures how compressing text embeddings to a small latent dimension
//! changes downstream regression error.
//!
//! A sweep trains an autoencoder per latent size, fits a regressor on the
//! codes, scores test rows with the Huber loss and compares every size
//! against the best one with a t-test. See `examples/` for runnable tours of
//! each stage.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autoencoder;
pub mod dataset;
mod envelope;
pub mod error;
pub mod ingest;
pub mod nn;
pub mod regressor;
pub mod rng;
pub mod sweep;
pub mod synth;

pub use autoencoder::{ae_train, AeTrainConfig, AeTrainReport, AutoencoderModel};
pub use dataset::{EmbeddingDataset, Split, Standardizer};
pub use error::{Error, Result};
pub use rng::RngSeed;
pub use sweep::{run_sweep, SweepConfig, SweepReport, SweepRun};
pub use synth::{generate, generate_with_truth, SynthConfig, SynthTruth};
