//! Permutation-free kernel tests for joint independence and high-order
//! interactions.
//!
//! A sample of `2n` draws is split into two halves. Kernel embeddings from
//! one half are compared against the other, which yields statistics whose
//! null distribution is asymptotically standard normal. Each hypothesis test
//! therefore costs `O(d n^2)` and needs no permutation resampling.
//!
//! Layout:
//! - [`kernels`]: kernels, Gram matrices, centring.
//! - [`partitions`]: bipartitions of the variable set.
//! - [`teststats`]: the normalised statistics and normal calibration.
//! - [`composite`]: joint-independence, Lancaster and complete-factorisation
//!   tests built from subtests.
//! - [`baseline`]: permutation-calibrated reference tests.
//! - [`synth`]: synthetic data generators.
//! - [`apps`]: causal discovery, feature screening and interaction profiling.

pub mod error;
pub mod rng;
pub mod matrix;
pub mod dataset;
pub mod kernels;
pub mod partitions;
pub mod teststats;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use matrix::Matrix;
pub mod composite;
pub mod baseline;
pub mod synth;
pub mod apps;
