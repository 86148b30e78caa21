//! Concurrent spin and light squeezing under stroboscopic atom-light
//! interaction.
//!
//! * [`params`]: physical constants and the couplings derived from them.
//! * [`strobe`]: the rectangular pulse train and its Fourier weights.
//! * [`analytic`]: closed-form spin variance and output-light spectrum.
//! * [`dynamics`]: stochastic trajectories and exact moment propagation.
//! * [`spectral`]: periodogram estimation and shot-noise normalization.
//! * [`fitlab`]: damped least-squares fitting of the model families.
//! * [`cli`]: the `strobosq` command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod fitlab;
pub mod params;
pub mod spectral;
pub mod strobe;

pub use error::{Error, Result};
