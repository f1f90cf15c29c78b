//! Wavelet shrinkage for non-Gaussian and heavy-tailed noise.
//!
//! The crate is organised around the sampling model `X_i = f_i + e_i / sqrt(n)`
//! with `n = 2^h`:
//!
//! * [`wavelet`]: orthonormal Haar and Daubechies-4 transforms on dyadic
//!   signals, plus cascaded filters expressing coarse basis functions in fine
//!   scaling coordinates.
//! * [`threshold`]: soft thresholding, level plans, the universal threshold
//!   and vertical block thresholding.
//! * [`prefilter`]: running medians that manufacture finite moments from heavy
//!   tails, with their tail and bias bounds.
//! * [`noise`]: seeded noise generators and moment bookkeeping.
//! * [`pipeline`]: estimators as prefilter, transform and shrinkage rule.
//! * [`besov`]: Besov sequence norms, tail-energy bounds and adversarial
//!   in-ball signals.
//! * [`risk`]: risk functionals, Monte Carlo minimax experiments, rate fits and
//!   executable probability-bound checks.
//! * [`experiment`]: configuration and orchestration used by the CLI.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod error;
pub mod experiment;
pub mod io;
pub mod noise;
pub mod normal;
pub mod pipeline;
pub mod prefilter;
pub mod risk;
pub mod threshold;
pub mod wavelet;

pub use error::{Error, Result};
pub use wavelet::{CoeffPyramid, Signal, WaveletKind, WaveletSpec};
