//! Population synthesis from a small sample by kernel density resampling.
//!
//! The central estimator draws every synthetic point from a REX crossover
//! kernel whose parents are a random subset of a sample point's k nearest
//! neighbors. Baselines (fixed-bandwidth Gaussian, BMP variable bandwidth,
//! likelihood-optimized crossover kernels), a marginal-matching variant, and
//! the binned-Hellinger inverted cross-validation harness live alongside it.

pub mod asymptotics;
pub mod bench;
pub mod data;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod io;
pub mod kernels;
pub mod knn;
pub mod points;
pub mod preprocess;
pub mod rng;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use points::PointSet;
