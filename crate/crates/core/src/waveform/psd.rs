//! Averaged zero-padded periodogram of OFDM symbols.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::curve::PsdCurve;
use super::grid::SubcarrierGrid;
use super::symbols::FreqSymbols;
use super::transform::OversampledIdft;
use crate::error::{Error, Result};

/// Frequency-domain zero-padding factor: bins are spaced `Δf / PAD`.
const PAD: usize = 8;

/// Averaged periodogram over `[-1.5 N, 1.5 N]` (one adjacent channel each
/// side), normalized to 0 dB mean in-band density.
///
/// Each symbol is resampled at `view_oversampling * N` points, zero-padded
/// to `PAD` times that length and transformed.
pub fn psd_estimate(
    batch: &[FreqSymbols],
    grid: &SubcarrierGrid,
    view_oversampling: usize,
) -> Result<PsdCurve> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if view_oversampling < 4 {
        return Err(Error::InvalidArgument(format!(
            "view oversampling must be at least 4, got {view_oversampling}"
        )));
    }
    let view = grid.with_oversampling(view_oversampling)?;
    let plan = OversampledIdft::new(view);
    let m = view.n_samples();
    let len = PAD * m;
    let fft = FftPlanner::new().plan_fft_forward(len);

    let half_bins = (3 * grid.n() * PAD) / 2;
    let mut acc = vec![0.0; 2 * half_bins + 1];
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for x in batch {
        x.check(grid)?;
        plan.apply(&x.0, &mut z);
        buf.fill(Complex64::new(0.0, 0.0));
        buf[..m].copy_from_slice(&z);
        fft.process(&mut buf);
        for (i, a) in acc.iter_mut().enumerate() {
            let j = i as isize - half_bins as isize;
            *a += buf[j.rem_euclid(len as isize) as usize].norm_sqr();
        }
    }

    let freqs: Vec<f64> = (0..acc.len())
        .map(|i| (i as f64 - half_bins as f64) / PAD as f64)
        .collect();
    let half_band = grid.n() as f64 / 2.0;
    let (sum, count) = freqs
        .iter()
        .zip(&acc)
        .filter(|(f, _)| f.abs() < half_band)
        .fold((0.0, 0usize), |(s, c), (_, a)| (s + a, c + 1));
    let inband_mean = sum / count as f64;
    if inband_mean <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let density = acc.iter().map(|a| a / inband_mean).collect();
    Ok(PsdCurve { freqs, density })
}
