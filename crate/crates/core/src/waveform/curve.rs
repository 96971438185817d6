use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Exceedance probability of normalized instantaneous power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    /// Linear power thresholds, ascending.
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdCurve {
    /// Frequencies in units of the subcarrier spacing.
    pub freqs: Vec<f64>,
    /// Linear density, normalized so the in-band average is 1 (0 dB).
    pub density: Vec<f64>,
}

fn two_column_csv(header: &str, a: &[f64], b: &[f64]) -> String {
    let mut out = String::with_capacity(32 * a.len());
    out.push_str(header);
    out.push('\n');
    for (x, y) in a.iter().zip(b) {
        let _ = writeln!(out, "{x:e},{y:e}");
    }
    out
}

impl CcdfCurve {
    pub fn to_csv(&self) -> String {
        two_column_csv("threshold,probability", &self.thresholds, &self.probabilities)
    }

    /// Smallest threshold (linear) at which the curve drops to `p` or below,
    /// linearly interpolated in dB between grid points.
    pub fn threshold_at(&self, p: f64) -> Option<f64> {
        let i = self.probabilities.iter().position(|&q| q <= p)?;
        if i == 0 {
            return Some(self.thresholds[0]);
        }
        let (t0, t1) = (self.thresholds[i - 1], self.thresholds[i]);
        let (q0, q1) = (self.probabilities[i - 1], self.probabilities[i]);
        if q0 == q1 || q1 <= 0.0 {
            return Some(t1);
        }
        let frac = (q0.ln() - p.ln()) / (q0.ln() - q1.ln());
        Some(t0 * (t1 / t0).powf(frac.clamp(0.0, 1.0)))
    }
}

impl PsdCurve {
    pub fn to_csv(&self) -> String {
        two_column_csv("freq,density", &self.freqs, &self.density)
    }

    /// Ratio of density mass outside `|f| <= half_band` to mass inside.
    pub fn out_of_band_ratio(&self, half_band: f64) -> f64 {
        let (mut inside, mut outside) = (0.0, 0.0);
        for (f, d) in self.freqs.iter().zip(&self.density) {
            if f.abs() <= half_band {
                inside += d;
            } else {
                outside += d;
            }
        }
        outside / inside
    }

    /// Mean density over `lo <= |f| <= hi`.
    pub fn mean_density(&self, lo: f64, hi: f64) -> f64 {
        let sel: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| f.abs() >= lo && f.abs() <= hi)
            .map(|(_, d)| *d)
            .collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    }
}
