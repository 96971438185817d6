//! Monte-Carlo evaluation of the tone-reservation baseline.

use serde::{Deserialize, Serialize};

use super::channel::{awgn_channel, noise_variance};
use super::demap::awgn_llr_demap;
use super::prt::sample_prt;
use super::qam::{QamConstellation, BITS_PER_SYMBOL};
use super::tone_reservation::{tr_minimize_peak, SolverConfig};
use crate::bits::{bit_cross_entropy, BitGrid, LlrGrid};
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::units::linear_to_db;
use crate::waveform::{
    aclr, compute_gram, papr_epsilon, FreqSymbols, GramPair, OversampledIdft, PaprEstimate,
    QuadratureConfig, SubcarrierGrid, TimeSignal,
};

/// Demapper noise floor used on the noiseless path.
const MIN_DEMAP_NOISE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub grid: SubcarrierGrid,
    pub reserved: usize,
    /// `f64::INFINITY` selects the noiseless channel.
    pub snr_db: f64,
    /// OFDM symbols simulated.
    pub n_symbols: usize,
    pub epsilon: f64,
    pub solver: SolverConfig,
    pub quadrature: QuadratureConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    pub reserved: usize,
    /// `(D / N) (K - BCE)` bits per channel use.
    pub rate: f64,
    /// Per data tone, bits.
    pub bce: f64,
    pub ber: f64,
    pub papr: PaprEstimate,
    pub aclr_db: f64,
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub metrics: BaselineMetrics,
    /// Transmitted composites `x + c`.
    pub symbols: Vec<FreqSymbols>,
    pub signals: Vec<TimeSignal>,
}

/// Mean per-row sum of bit cross-entropies (bits per tone).
pub fn bce_bits(llrs: &LlrGrid, bits: &[u8]) -> f64 {
    let total: f64 = llrs.llrs.iter().zip(bits).map(|(&l, &b)| bit_cross_entropy(l, b)).sum();
    total / llrs.rows.max(1) as f64
}

pub fn baseline_rate(cfg: &BaselineConfig) -> Result<BaselineRun> {
    let gram = compute_gram(&cfg.grid, &cfg.quadrature)?;
    baseline_rate_with(cfg, &gram)
}

pub fn baseline_rate_with(cfg: &BaselineConfig, gram: &GramPair) -> Result<BaselineRun> {
    let grid = cfg.grid;
    let n = grid.n();
    if cfg.reserved > n {
        return Err(Error::ReservedOutOfRange { r: cfg.reserved, n });
    }
    if cfg.n_symbols == 0 {
        return Err(Error::EmptyBatch);
    }
    let plan = OversampledIdft::new(grid);
    let constellation = QamConstellation::qam16();
    let mut prt_rng = stream(cfg.seed, "prt");
    let mut bit_rng = stream(cfg.seed, "bits");
    let mut noise_rng = stream(cfg.seed, "noise");
    let demap_var = noise_variance(cfg.snr_db).max(MIN_DEMAP_NOISE);

    let mut symbols = Vec::with_capacity(cfg.n_symbols);
    let mut signals = Vec::with_capacity(cfg.n_symbols);
    let (mut bce_sum, mut errors, mut data_bits) = (0.0, 0usize, 0usize);
    for _ in 0..cfg.n_symbols {
        let alloc = sample_prt(&grid, cfg.reserved, &mut prt_rng)?;
        // Bits for every tone keep the data stream identical across PRT
        // counts; reserved rows are dropped.
        let all_bits = BitGrid::random(n, BITS_PER_SYMBOL, &mut bit_rng);
        let mut x = FreqSymbols::zeros(n);
        let mut sent = Vec::with_capacity(alloc.data().len() * BITS_PER_SYMBOL);
        for &pos in alloc.data() {
            x.0[pos] = constellation.map_bits(all_bits.row(pos));
            sent.extend_from_slice(all_bits.row(pos));
        }
        let sol = tr_minimize_peak(&x, &alloc, &plan, &cfg.solver)?;
        let composite = &x + &sol.c;
        let y = awgn_channel(&composite, cfg.snr_db, &mut noise_rng);
        if !alloc.data().is_empty() {
            let llrs = awgn_llr_demap(&y, demap_var, &constellation, alloc.data())?;
            bce_sum += bce_bits(&llrs, &sent) * alloc.data().len() as f64;
            errors += llrs.hard_decisions().iter().zip(&sent).filter(|(a, b)| a != b).count();
            data_bits += sent.len();
        }
        signals.push(plan.to_time(&composite)?);
        symbols.push(composite);
    }

    let data_tones = n - cfg.reserved;
    let tone_count = (data_tones * cfg.n_symbols).max(1) as f64;
    let bce = if data_tones == 0 { BITS_PER_SYMBOL as f64 } else { bce_sum / tone_count };
    let rate = data_tones as f64 / n as f64 * (BITS_PER_SYMBOL as f64 - bce);
    let papr = papr_epsilon(&signals, cfg.epsilon)?;
    let aclr_lin = aclr(&symbols, gram)?;
    let metrics = BaselineMetrics {
        reserved: cfg.reserved,
        rate,
        bce,
        ber: errors as f64 / data_bits.max(1) as f64,
        papr,
        aclr_db: linear_to_db(aclr_lin),
    };
    Ok(BaselineRun { metrics, symbols, signals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::build_grid;

    fn cfg(reserved: usize, snr_db: f64, n_symbols: usize) -> BaselineConfig {
        BaselineConfig {
            grid: build_grid(15, 4).unwrap(),
            reserved,
            snr_db,
            n_symbols,
            epsilon: 1e-2,
            solver: SolverConfig::default(),
            quadrature: QuadratureConfig::default(),
            seed: 1,
        }
    }

    #[test]
    fn noiseless_rate_is_k() {
        let run = baseline_rate(&cfg(0, f64::INFINITY, 50)).unwrap();
        assert_eq!(run.metrics.rate, 4.0);
        assert_eq!(run.metrics.ber, 0.0);
    }

    #[test]
    fn reserved_tones_scale_rate() {
        let run = baseline_rate(&cfg(3, f64::INFINITY, 30)).unwrap();
        assert!((run.metrics.rate - 4.0 * 12.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = baseline_rate(&cfg(2, 10.0, 20)).unwrap();
        let b = baseline_rate(&cfg(2, 10.0, 20)).unwrap();
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn all_reserved_is_rejected_cleanly() {
        let mut c = cfg(15, 10.0, 2);
        c.reserved = 16;
        assert!(baseline_rate(&c).is_err());
    }
}
