//! 16-QAM with random tone reservation: the benchmark the learned system is
//! compared against.

mod channel;
mod demap;
mod prt;
mod qam;
mod rate;
mod tone_reservation;

pub use channel::{awgn_channel, complex_gaussian, noise_variance};
pub use demap::awgn_llr_demap;
pub use prt::{sample_prt, PrtAllocation};
pub use qam::{label_bits, label_of, qam16_map, QamConstellation, BITS_PER_SYMBOL};
pub use rate::{baseline_rate, baseline_rate_with, bce_bits, BaselineConfig, BaselineMetrics, BaselineRun};
pub use tone_reservation::{trace_csv, tr_minimize_peak, PeakProblem, SolverConfig, StepRule, TrSolution};
