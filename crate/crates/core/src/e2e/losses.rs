//! Loss terms on plain batches (no graph). The training graph uses the
//! equivalents in [`ops`](super::ops); these are the reference values used
//! for logging and evaluation.

use crate::bits::{bit_cross_entropy, BitGrid, LlrGrid};
use crate::error::{Error, Result};
use crate::waveform::{aclr, FreqSymbols, GramPair, OversampledIdft};

/// Scale a batch so that `sum ||x_i||^2 / (N B) = 1`. Returns the divisor.
pub fn normalize_batch(batch: &[FreqSymbols]) -> Result<(Vec<FreqSymbols>, f64)> {
    let n = batch.first().ok_or(Error::EmptyBatch)?.len();
    if batch.iter().any(|x| x.len() != n) {
        return Err(Error::ShapeMismatch("ragged batch".into()));
    }
    let energy: f64 = batch.iter().map(|x| x.energy()).sum();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let d = (energy / (n * batch.len()) as f64).sqrt();
    Ok((batch.iter().map(|x| x.scaled(1.0 / d)).collect(), d))
}

/// `-(1/(N B)) sum log2 P(b | llr)`; the rate estimate is `K - loss_bce`.
pub fn loss_bce(llrs: &LlrGrid, bits: &BitGrid) -> Result<f64> {
    if llrs.rows != bits.rows() || llrs.k != bits.k() {
        return Err(Error::ShapeMismatch(format!(
            "llrs {}x{} vs bits {}x{}",
            llrs.rows,
            llrs.k,
            bits.rows(),
            bits.k()
        )));
    }
    let total: f64 = llrs.llrs.iter().zip(bits.as_slice()).map(|(&l, &b)| bit_cross_entropy(l, b)).sum();
    Ok(total / llrs.rows.max(1) as f64)
}

/// Mean over all time samples of `max(0, p - gamma)` with `p` the sample
/// power divided by the batch mean power.
pub fn loss_papr(batch: &[FreqSymbols], plan: &OversampledIdft, gamma: f64) -> Result<f64> {
    let mut powers = Vec::with_capacity(batch.len() * plan.grid().n_samples());
    for x in batch {
        powers.extend(plan.to_time(x)?.powers());
    }
    if powers.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let count = powers.len() as f64;
    let mean = powers.iter().sum::<f64>() / count;
    if !(mean > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    Ok(powers.iter().map(|p| (p / mean - gamma).max(0.0)).sum::<f64>() / count)
}

/// ACLR (linear) minus the target.
pub fn loss_aclr(batch: &[FreqSymbols], gram: &GramPair, beta: f64) -> Result<f64> {
    Ok(aclr(batch, gram)? - beta)
}
