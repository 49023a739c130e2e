//! Opcode-frequency malware classification.
//!
//! The pipeline turns objdump listings into opcode histograms, balances the
//! classes with ADASYN, optionally reduces the feature space (variance
//! threshold or autoencoder bottleneck), trains a random forest or a deep
//! feed-forward classifier, and scores everything with k-fold cross-validation.

pub mod balance;
pub mod codec;
pub mod config;
pub mod dataset;
pub mod disasm;
pub mod error;
pub mod evaluate;
pub mod models;
pub mod neural;
pub mod pipeline;
pub mod reduce;
pub mod seed;

pub use error::{Error, Result};
pub use ndarray;
