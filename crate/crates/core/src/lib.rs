//! Constrained black-box hyper-parameter search with hardware cost models.
//!
//! The crate couples a Gaussian-process surrogate and constraint-aware
//! acquisition functions with linear power/memory predictors, two random
//! baselines, a deterministic neural-network training simulator, and an
//! experiment harness producing journaled, resumable runs.

// Validation guards use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod config;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod hw;
pub mod journal;
pub mod report;
pub mod rng;
pub mod sim;
pub mod solver;
pub mod space;
pub mod stats;

pub use error::{Error, Result};
