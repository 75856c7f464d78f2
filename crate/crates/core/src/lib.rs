//! Band-limited equivalence of convolution operators on periodic grids.
//!
//! Two convolution operators act identically on every field whose spectrum
//! lives in a band exactly when their Fourier symbols agree on that band;
//! what the kernels do outside the band is invisible. This crate provides
//! the machinery to construct, check and diagnose that situation:
//!
//! - [`spectral`]: grids, real/spectral fields, the FFT convention, norms.
//! - [`bands`]: band masks, multipliers and seeded band-limited fields.
//! - [`operators`]: multiplier application, a brute-force convolution
//!   oracle and the band-equivalence checker.
//! - [`diagnostics`]: shell-averaged gain and coherence, zero-intercept
//!   fits, curl operators and closure estimates.
//! - [`langevin`]: Ornstein-Uhlenbeck trajectories and Green-Kubo
//!   decorrelation times.
//! - [`experiments`]: seeded experiment runners and their file exports.

pub mod bands;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod langevin;
pub mod operators;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
