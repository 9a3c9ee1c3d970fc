//! Binned Hellinger distance, inverted cross-validation, and Welch's t-test.

mod hellinger;
mod icv;
mod welch;

pub use hellinger::{hellinger, hellinger_union, make_binning, make_union_binning, BinningSpec};
pub use icv::{icv_run, icv_sweep, IcvOptions, IcvReport, IcvSplits};
pub use welch::{mean_sd, welch_samples, welch_t, WelchResult};
