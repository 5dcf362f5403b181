//! Jointly optimal linear encoder/decoder design for delay-constrained
//! transmission of a noisy stationary Gaussian source over a power-limited
//! additive Gaussian noise channel.
//!
//! The pipeline reduces the non-convex encoder/decoder problem to a convex
//! mixed-norm problem over the product filter `K = DC` ([`kopt`]), solves it
//! over FIR filters, and recovers `C` and `D` by spectral factorization
//! ([`codec_synth`]). [`baselines`] provides the Wiener limit and the
//! rate-distortion lower bound, and [`sim`] checks designs by Monte Carlo.

pub mod baselines;
pub mod codec_synth;
mod dft;
pub mod error;
pub mod kopt;
pub mod linalg;
pub mod sim;
pub mod spectral;
pub mod tf_core;

pub use error::{Error, Result};
