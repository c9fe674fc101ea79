//! Quantum-noise modeling and optimization for cavity-enhanced force sensors
//! that combine injected squeezed vacuum with a parametric (squeeze) operation
//! inside the sensor cavity.
//!
//! The crate is organized around the signal path:
//!
//! - [`sensor`]: closed-form single-mode output spectra, signal transfer,
//!   sensitivity, the lossless bound and the threshold benchmark.
//! - [`decoherence`]: squeeze source, injection loss, phase jitter and
//!   readout loss applied to the light entering and leaving the cavity.
//! - [`limits`]: analytic optima, the internal-loss limit, numerical gain
//!   optimization, SNR-gain metrics and parameter sweeps.
//! - [`oracle`]: two independent checks of the closed forms, an exact
//!   quadrature transfer-matrix composition and a stochastic Langevin
//!   simulator with Welch spectral estimation.
//! - [`calibration`]: synthetic two-quadrature variance data and weighted
//!   Levenberg-Marquardt parameter recovery.
//! - [`cli`]: the config-driven front end used by the `sqzcav` binary.
//!
//! All frequencies are in the normalized units in which the cavity
//! denominator reads `(T_c + eps_int + q)^2 + omega^2`. The internal gain `q`
//! is positive when it deamplifies (squeezes) the signal quadrature.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod decoherence;
mod error;
pub mod limits;
pub mod minimize;
pub mod oracle;
pub mod sensor;

pub use error::{Error, Result};
