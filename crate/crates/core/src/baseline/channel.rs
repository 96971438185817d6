use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::waveform::FreqSymbols;

/// Per-subcarrier complex noise variance for unit mean symbol energy.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian(var: f64, rng: &mut impl Rng) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

pub fn awgn_channel(x: &FreqSymbols, snr_db: f64, rng: &mut impl Rng) -> FreqSymbols {
    let var = noise_variance(snr_db);
    if var == 0.0 {
        return x.clone();
    }
    FreqSymbols(x.0.iter().map(|xi| xi + complex_gaussian(var, rng)).collect())
}
