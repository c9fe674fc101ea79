//! Independent checks of the closed-form spectra.
//!
//! [`transfer`] composes the exact linear input-output relations of every
//! port as complex matrices, [`sde`] integrates the stochastic Langevin
//! equations in the time domain and estimates spectra from the samples, and
//! [`compare`] runs both against the closed forms.

pub mod compare;
pub mod sde;
pub mod transfer;

pub use compare::{
    compare_oracles, default_grid, default_probes, CompareOptions, DiscrepancyReport, GridPoint,
    SdeProbe,
};
pub use sde::{run_sde, simulate_signal_transfer, PsdEstimate, SdeRunSpec};
pub use transfer::{assemble_transfer, jitter_averaged, QuadratureTransfer};
