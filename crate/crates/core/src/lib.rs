//! Adaptive mmWave beam search by Iterative Deactivation and Beam Shifting.
//!
//! The library implements the full search stack: scalar special functions for
//! the noncentral chi-square measurement model, the Bayesian pairwise test and
//! its precomputed threshold tables, ULA/DFT codebook geometry, random channel
//! generation, the iterative deactivation state machine with restoration and
//! beam shifting, comparison baselines, deactivation-probability bounds, and a
//! config-driven Monte Carlo experiment harness.

pub mod analysis;
pub mod baselines;
pub mod beams;
pub mod channel;
pub mod error;
pub mod harness;
pub mod idbs;
pub mod posterior;
pub(crate) mod quad;
pub mod specfun;

pub use error::{Error, Result};
