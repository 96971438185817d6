//! Learning OFDM-compatible modulations under PAPR and ACLR constraints.
//!
//! - [`waveform`]: grid, oversampled IDFT, energy Gram matrices, PAPR/ACLR/CCDF/PSD.
//! - [`baseline`]: 16-QAM with random tone reservation and exact soft demapping.
//! - [`nn`]: tensor-level reverse-mode autodiff and the CNN layer set.
//! - [`e2e`]: neural transmitter/receiver, loss terms, augmented Lagrangian training.
//! - [`experiment`]: configs, sweeps and report files.

pub mod baseline;
pub mod bits;
pub mod e2e;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod rng;
pub mod units;
pub mod waveform;

pub use error::{Error, Result};
