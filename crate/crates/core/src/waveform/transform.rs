//! Zero-padded oversampled IDFT between the subcarrier grid and the
//! midpoint-sampled time axis.
//!
//! Sample `k` of the oversampled waveform is
//! `z_k = (1/sqrt(M)) * sum_n x_n exp(i 2 pi n t_k)` with `M = N * O_s` and
//! `t_k = -1/2 + (k + 1/2)/M`. The columns of this `M x N` map are
//! orthonormal, so `|z|^2 = |x|^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::SubcarrierGrid;
use super::symbols::{FreqSymbols, TimeSignal};
use crate::error::{Error, Result};

#[derive(Clone)]
pub struct OversampledIdft {
    grid: SubcarrierGrid,
    inverse: Arc<dyn Fft<f64>>,
    forward: Arc<dyn Fft<f64>>,
    /// Per-position phase `exp(i pi n (1 - M) / M) / sqrt(M)`.
    twiddle: Vec<Complex64>,
    /// FFT bin of each subcarrier position (`n mod M`).
    bins: Vec<usize>,
}

impl std::fmt::Debug for OversampledIdft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OversampledIdft").field("grid", &self.grid).finish()
    }
}

impl OversampledIdft {
    pub fn new(grid: SubcarrierGrid) -> Self {
        let m = grid.n_samples();
        let mut planner = FftPlanner::new();
        let inverse = planner.plan_fft_inverse(m);
        let forward = planner.plan_fft_forward(m);
        let scale = 1.0 / (m as f64).sqrt();
        let mf = m as f64;
        let twiddle = grid
            .indices()
            .map(|n| Complex64::from_polar(scale, PI * n as f64 * (1.0 - mf) / mf))
            .collect();
        let bins = grid
            .indices()
            .map(|n| n.rem_euclid(m as i64) as usize)
            .collect();
        OversampledIdft { grid, inverse, forward, twiddle, bins }
    }

    pub fn grid(&self) -> &SubcarrierGrid {
        &self.grid
    }

    /// `out = F^{-1} x`; `out` must hold `N * O_s` samples.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.grid.n());
        debug_assert_eq!(out.len(), self.grid.n_samples());
        out.fill(Complex64::new(0.0, 0.0));
        for ((xi, w), &bin) in x.iter().zip(&self.twiddle).zip(&self.bins) {
            out[bin] = xi * w;
        }
        self.inverse.process(out);
    }

    /// `out = F^{-H} z`, the adjoint of [`apply`](Self::apply).
    pub fn adjoint(&self, z: &[Complex64], out: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(z.len(), self.grid.n_samples());
        scratch.clear();
        scratch.extend_from_slice(z);
        self.forward.process(scratch);
        for ((o, w), &bin) in out.iter_mut().zip(&self.twiddle).zip(&self.bins) {
            *o = scratch[bin] * w.conj();
        }
    }

    pub fn to_time(&self, x: &FreqSymbols) -> Result<TimeSignal> {
        if x.len() != self.grid.n() {
            return Err(Error::LengthMismatch { expected: self.grid.n(), got: x.len() });
        }
        let mut samples = vec![Complex64::new(0.0, 0.0); self.grid.n_samples()];
        self.apply(&x.0, &mut samples);
        Ok(TimeSignal { samples, sample_period: self.grid.sample_period() })
    }

    /// Batched transform on interleaved (re, im) pairs: `[B, N, 2] -> [B, M, 2]`.
    pub fn apply_pairs(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (n, m) = (self.grid.n(), self.grid.n_samples());
        let mut out = vec![0.0; batch * m * 2];
        let mut xin = vec![Complex64::new(0.0, 0.0); n];
        let mut z = vec![Complex64::new(0.0, 0.0); m];
        for b in 0..batch {
            for (i, c) in xin.iter_mut().enumerate() {
                *c = Complex64::new(x[(b * n + i) * 2], x[(b * n + i) * 2 + 1]);
            }
            self.apply(&xin, &mut z);
            for (k, c) in z.iter().enumerate() {
                out[(b * m + k) * 2] = c.re;
                out[(b * m + k) * 2 + 1] = c.im;
            }
        }
        out
    }

    /// Adjoint of [`apply_pairs`](Self::apply_pairs) under the real inner
    /// product: `[B, M, 2] -> [B, N, 2]`.
    pub fn adjoint_pairs(&self, z: &[f64], batch: usize) -> Vec<f64> {
        let (n, m) = (self.grid.n(), self.grid.n_samples());
        let mut out = vec![0.0; batch * n * 2];
        let mut zin = vec![Complex64::new(0.0, 0.0); m];
        let mut xo = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = Vec::with_capacity(m);
        for b in 0..batch {
            for (k, c) in zin.iter_mut().enumerate() {
                *c = Complex64::new(z[(b * m + k) * 2], z[(b * m + k) * 2 + 1]);
            }
            self.adjoint(&zin, &mut xo, &mut scratch);
            for (i, c) in xo.iter().enumerate() {
                out[(b * n + i) * 2] = c.re;
                out[(b * n + i) * 2 + 1] = c.im;
            }
        }
        out
    }
}

pub fn to_time(x: &FreqSymbols, grid: &SubcarrierGrid) -> Result<TimeSignal> {
    OversampledIdft::new(*grid).to_time(x)
}
