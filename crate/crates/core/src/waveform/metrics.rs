//! Energy, ACLR, PAPR and CCDF estimators.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::curve::CcdfCurve;
use super::gram::GramPair;
use super::symbols::{FreqSymbols, TimeSignal};
use crate::error::{Error, Result};
use crate::units::linear_to_db;

/// `(x^H V x, x^H W x)`.
pub fn energies(x: &FreqSymbols, gram: &GramPair) -> Result<(f64, f64)> {
    if x.len() != gram.n() {
        return Err(Error::LengthMismatch { expected: gram.n(), got: x.len() });
    }
    Ok((gram.inband_energy(x).max(0.0), gram.total_energy(x)))
}

/// Sample-mean ACLR estimate `sum x^H W x / sum x^H V x - 1` (linear).
pub fn aclr(batch: &[FreqSymbols], gram: &GramPair) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (mut inband, mut total) = (0.0, 0.0);
    for x in batch {
        let (i, t) = energies(x, gram)?;
        inband += i;
        total += t;
    }
    if inband <= 0.0 {
        return Err(Error::ZeroInbandEnergy);
    }
    Ok(total / inband - 1.0)
}

/// Instantaneous powers of every sample in the batch, divided by the batch
/// mean power.
pub fn pooled_normalized_powers(batch: &[TimeSignal]) -> Result<Vec<f64>> {
    let count: usize = batch.iter().map(|z| z.samples.len()).sum();
    if count == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut powers: Vec<f64> = batch.iter().flat_map(|z| z.powers()).collect();
    let mean = powers.iter().sum::<f64>() / count as f64;
    if mean <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    for p in &mut powers {
        *p /= mean;
    }
    Ok(powers)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaprEstimate {
    pub linear: f64,
    pub db: f64,
    pub epsilon: f64,
    pub pooled_samples: usize,
    /// Fewer than `10 / epsilon` pooled samples were available.
    pub undersized: bool,
}

/// Smallest pooled value with at most `epsilon * M` strictly greater values.
/// `sorted` must be ascending.
pub fn upper_quantile(sorted: &[f64], epsilon: f64) -> f64 {
    let m = sorted.len();
    let allowed = (epsilon * m as f64).floor() as usize;
    if allowed >= m {
        return sorted[0];
    }
    sorted[m - 1 - allowed]
}

pub fn papr_epsilon(batch: &[TimeSignal], epsilon: f64) -> Result<PaprEstimate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let mut powers = pooled_normalized_powers(batch)?;
    powers.sort_by(f64::total_cmp);
    let linear = upper_quantile(&powers, epsilon);
    Ok(PaprEstimate {
        linear,
        db: linear_to_db(linear),
        epsilon,
        pooled_samples: powers.len(),
        undersized: (powers.len() as f64) < 10.0 / epsilon,
    })
}

/// Streaming form of [`papr_epsilon`] for pools too large to hold.
///
/// The total sample count must be known up front; only the
/// `floor(epsilon * M) + 1` largest powers are retained. Pushing exactly
/// `total` samples and calling [`finish`](Self::finish) gives the same value
/// as sorting the whole pool.
pub struct PaprAccumulator {
    epsilon: f64,
    total: usize,
    keep: usize,
    seen: usize,
    sum: f64,
    // non-negative f64 bit patterns sort like the values
    top: BinaryHeap<Reverse<u64>>,
}

impl PaprAccumulator {
    pub fn new(epsilon: f64, total: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        if total == 0 {
            return Err(Error::EmptyBatch);
        }
        let keep = ((epsilon * total as f64).floor() as usize + 1).min(total);
        Ok(PaprAccumulator { epsilon, total, keep, seen: 0, sum: 0.0, top: BinaryHeap::with_capacity(keep + 1) })
    }

    pub fn push_signal(&mut self, z: &TimeSignal) {
        for p in z.powers() {
            self.push(p);
        }
    }

    pub fn push(&mut self, power: f64) {
        self.seen += 1;
        self.sum += power;
        let bits = power.max(0.0).to_bits();
        if self.top.len() < self.keep {
            self.top.push(Reverse(bits));
        } else if let Some(&Reverse(min)) = self.top.peek() {
            if bits > min {
                self.top.pop();
                self.top.push(Reverse(bits));
            }
        }
    }

    pub fn finish(self) -> Result<PaprEstimate> {
        if self.seen != self.total {
            return Err(Error::LengthMismatch { expected: self.total, got: self.seen });
        }
        let mean = self.sum / self.total as f64;
        if !(mean > 0.0) {
            return Err(Error::ZeroEnergy);
        }
        let Reverse(q) = *self.top.peek().ok_or(Error::EmptyBatch)?;
        let linear = f64::from_bits(q) / mean;
        Ok(PaprEstimate {
            linear,
            db: linear_to_db(linear),
            epsilon: self.epsilon,
            pooled_samples: self.total,
            undersized: (self.total as f64) < 10.0 / self.epsilon,
        })
    }
}

pub fn ccdf_from_sorted(sorted: &[f64], thresholds: &[f64]) -> Result<CcdfCurve> {
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::UnsortedThresholds);
    }
    let m = sorted.len() as f64;
    let probabilities = thresholds
        .iter()
        .map(|&t| {
            let above = sorted.len() - sorted.partition_point(|&p| p <= t);
            above as f64 / m
        })
        .collect();
    Ok(CcdfCurve { thresholds: thresholds.to_vec(), probabilities })
}

pub fn ccdf_power(batch: &[TimeSignal], thresholds: &[f64]) -> Result<CcdfCurve> {
    let mut powers = pooled_normalized_powers(batch)?;
    powers.sort_by(f64::total_cmp);
    ccdf_from_sorted(&powers, thresholds)
}

/// Thresholds evenly spaced in dB.
pub fn db_thresholds(lo_db: f64, hi_db: f64, step_db: f64) -> Vec<f64> {
    let n = ((hi_db - lo_db) / step_db).round() as usize;
    (0..=n)
        .map(|i| 10f64.powf((lo_db + i as f64 * step_db) / 10.0))
        .collect()
}
