//! Transportation-mode recognition from 5-second phone motion windows in
//! which one of the three sensor modalities is missing.
//!
//! The pipeline:
//!
//! 1. [`data`]: load SHL-style channel files, assign one label per window and
//!    detect the zero-masked modality.
//! 2. [`processing`]: scale units and derive three raw-axis and four
//!    orientation-free magnitude signals per modality.
//! 3. [`features`]: 70 magnitude-robust features per signal.
//! 4. [`aggregation`]: condense raw-axis features with symmetric statistics
//!    and assemble the vector for a feature configuration.
//! 5. [`model`]: histogram gradient-boosted trees with balanced class
//!    weights, plus macro F1 and confusion matrices.
//! 6. [`pipeline`]: one model family per missing modality, K-fold majority
//!    voting, out-of-fold scoring and the configuration ablation.
//!
//! See `examples/` for one runnable program per stage.

pub mod aggregation;
mod binfmt;
pub mod cli;
pub mod data;
pub mod error;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod processing;
pub mod stats;

pub use error::{Error, Result};
