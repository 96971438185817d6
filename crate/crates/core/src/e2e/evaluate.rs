//! Monte-Carlo evaluation of a trained transceiver in inference mode.

use serde::{Deserialize, Serialize};

use super::losses::loss_bce;
use super::model::{noise_tensor, to_llr_grid, to_symbols, Transceiver};
use crate::bits::BitGrid;
use crate::error::{Error, Result};
use crate::nn::{Graph, Mode};
use crate::rng::stream;
use crate::units::linear_to_db;
use crate::waveform::{
    aclr, ccdf_from_sorted, db_thresholds, papr_epsilon, pooled_normalized_powers, psd_estimate, CcdfCurve, FreqSymbols,
    GramPair, OversampledIdft, PaprEstimate, PsdCurve,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub snr_db: f64,
    pub batches: usize,
    pub batch_size: usize,
    pub epsilon: f64,
    pub psd_oversampling: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eMetrics {
    /// `K - BCE`, bits per channel use.
    pub rate: f64,
    pub bce: f64,
    pub ber: f64,
    pub papr: PaprEstimate,
    pub aclr_db: f64,
}

pub struct Evaluation {
    pub metrics: E2eMetrics,
    pub ccdf: CcdfCurve,
    pub psd: PsdCurve,
    pub symbols: Vec<FreqSymbols>,
}

pub fn evaluate(model: &mut Transceiver, gram: &GramPair, cfg: &EvalConfig) -> Result<Evaluation> {
    if cfg.batches == 0 || cfg.batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = model.grid.n();
    let plan = OversampledIdft::new(model.grid);
    let mut bit_rng = stream(cfg.seed, "eval-bits");
    let mut noise_rng = stream(cfg.seed, "eval-noise");
    let mut symbols = Vec::with_capacity(cfg.batches * cfg.batch_size);
    let (mut bce_sum, mut errors, mut total_bits) = (0.0, 0usize, 0usize);
    for _ in 0..cfg.batches {
        let bits = BitGrid::random(cfg.batch_size * n, model.k, &mut bit_rng);
        let noise = noise_tensor(cfg.batch_size, n, cfg.snr_db, &mut noise_rng);
        let mut g = Graph::new();
        let x = model.transmit(&mut g, &bits, Mode::Infer)?;
        let y = g.add_const(x, &noise)?;
        let l = model.receive(&mut g, y, Mode::Infer)?;
        let llrs = to_llr_grid(g.value(l));
        bce_sum += loss_bce(&llrs, &bits)?;
        errors += llrs.hard_decisions().iter().zip(bits.as_slice()).filter(|(a, b)| a != b).count();
        total_bits += bits.as_slice().len();
        symbols.extend(to_symbols(g.value(x)));
    }
    let bce = bce_sum / cfg.batches as f64;
    let signals = symbols.iter().map(|x| plan.to_time(x)).collect::<Result<Vec<_>>>()?;
    let papr = papr_epsilon(&signals, cfg.epsilon)?;
    let mut powers = pooled_normalized_powers(&signals)?;
    powers.sort_by(f64::total_cmp);
    let ccdf = ccdf_from_sorted(&powers, &db_thresholds(0.0, 13.0, 0.1))?;
    let psd = psd_estimate(&symbols, &model.grid, cfg.psd_oversampling)?;
    let metrics = E2eMetrics {
        rate: model.k as f64 - bce,
        bce,
        ber: errors as f64 / total_bits as f64,
        papr,
        aclr_db: linear_to_db(aclr(&symbols, gram)?),
    };
    Ok(Evaluation { metrics, ccdf, psd, symbols })
}
