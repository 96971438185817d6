use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centered OFDM subcarrier grid with normalized spacing and symbol duration
/// (`Δf = 1`, `T = 1`).
///
/// Subcarrier `n` lives at storage position `n + (N - 1) / 2`, so position 0
/// is the lowest-frequency tone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct SubcarrierGrid {
    n_subcarriers: usize,
    oversampling: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct GridSpec {
    n_subcarriers: usize,
    oversampling: usize,
}

impl TryFrom<GridSpec> for SubcarrierGrid {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        build_grid(spec.n_subcarriers, spec.oversampling)
    }
}

impl From<SubcarrierGrid> for GridSpec {
    fn from(g: SubcarrierGrid) -> Self {
        GridSpec { n_subcarriers: g.n_subcarriers, oversampling: g.oversampling }
    }
}

pub fn build_grid(n_subcarriers: usize, oversampling: usize) -> Result<SubcarrierGrid> {
    if n_subcarriers < 3 || n_subcarriers.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "subcarrier count must be odd and at least 3, got {n_subcarriers}"
        )));
    }
    if oversampling < 1 {
        return Err(Error::InvalidGrid("oversampling factor must be at least 1".into()));
    }
    Ok(SubcarrierGrid { n_subcarriers, oversampling })
}

impl SubcarrierGrid {
    pub fn n(&self) -> usize {
        self.n_subcarriers
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    /// Number of time samples per OFDM symbol, `N * O_s`.
    pub fn n_samples(&self) -> usize {
        self.n_subcarriers * self.oversampling
    }

    pub fn half_width(&self) -> i64 {
        ((self.n_subcarriers - 1) / 2) as i64
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        1.0
    }

    pub fn symbol_duration(&self) -> f64 {
        1.0
    }

    pub fn sample_period(&self) -> f64 {
        self.symbol_duration() / self.n_samples() as f64
    }

    /// Subcarrier index stored at `pos`.
    pub fn index_at(&self, pos: usize) -> i64 {
        pos as i64 - self.half_width()
    }

    pub fn position_of(&self, index: i64) -> Option<usize> {
        let pos = index + self.half_width();
        (pos >= 0 && (pos as usize) < self.n_subcarriers).then_some(pos as usize)
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.n_subcarriers).map(|p| self.index_at(p))
    }

    /// Midpoint sample instants `t_k = -T/2 + (k + 1/2) T / (N O_s)`.
    pub fn sample_times(&self) -> Vec<f64> {
        let m = self.n_samples() as f64;
        (0..self.n_samples())
            .map(|k| -0.5 + (k as f64 + 0.5) / m)
            .collect()
    }

    pub fn with_oversampling(&self, oversampling: usize) -> Result<SubcarrierGrid> {
        build_grid(self.n_subcarriers, oversampling)
    }
}
