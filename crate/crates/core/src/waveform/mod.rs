//! OFDM baseband physics: grid, oversampled transform, energy Gram
//! matrices and the PAPR / ACLR / CCDF / PSD estimators shared by the
//! baseline and the learned system.

mod curve;
mod gram;
mod grid;
mod metrics;
mod psd;
mod symbols;
mod transform;

pub use curve::{CcdfCurve, PsdCurve};
pub use gram::{compute_gram, gauss_legendre, sinc, GramPair, QuadratureConfig};
pub use grid::{build_grid, SubcarrierGrid};
pub use metrics::{
    aclr, ccdf_from_sorted, ccdf_power, db_thresholds, energies, papr_epsilon, PaprAccumulator,
    pooled_normalized_powers, upper_quantile, PaprEstimate,
};
pub use psd::psd_estimate;
pub use symbols::{FreqSymbols, TimeSignal};
pub use transform::{to_time, OversampledIdft};
