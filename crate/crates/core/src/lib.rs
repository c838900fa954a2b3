//! Fairness-aware training at desk scale: a deterministic dense-network
//! engine, loss reweighting with individual/group scaling, cohort-teacher
//! knowledge distillation, and the evaluation stack that goes with it
//! (AUC-based fairness metrics, overlap metrics, Friedman/Nemenyi rank
//! statistics, and a synthetic biased-benchmark generator).
//!
//! The pipeline trains three stages on top of a shared backbone:
//! a reweighted backbone model, one greedy teacher head per cohort, and a
//! distilled student head that balances overall accuracy against
//! inter-group disparity. Everything is seeded and single-threaded, so a
//! (seed, config) pair reproduces checkpoints bit for bit.

pub mod cli;
pub mod data;
pub mod datagen;
pub mod distill;
pub mod error;
pub mod fis;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
