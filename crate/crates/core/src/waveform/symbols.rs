use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::SubcarrierGrid;
use crate::error::{Error, Result};

/// Baseband symbols on the subcarrier grid, stored lowest frequency first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqSymbols(pub Vec<Complex64>);

impl FreqSymbols {
    pub fn zeros(n: usize) -> Self {
        FreqSymbols(vec![Complex64::new(0.0, 0.0); n])
    }

    /// Unit symbol on subcarrier index `index` (0 is the center tone).
    pub fn tone(grid: &SubcarrierGrid, index: i64) -> Result<Self> {
        let pos = grid
            .position_of(index)
            .ok_or_else(|| Error::InvalidArgument(format!("subcarrier {index} not on grid")))?;
        let mut x = Self::zeros(grid.n());
        x.0[pos] = Complex64::new(1.0, 0.0);
        Ok(x)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        FreqSymbols(self.0.iter().map(|c| c * s).collect())
    }

    pub fn check(&self, grid: &SubcarrierGrid) -> Result<()> {
        if self.0.len() != grid.n() {
            return Err(Error::LengthMismatch { expected: grid.n(), got: self.0.len() });
        }
        if self.0.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite symbol".into()));
        }
        Ok(())
    }
}

impl std::ops::Add<&FreqSymbols> for &FreqSymbols {
    type Output = FreqSymbols;
    fn add(self, rhs: &FreqSymbols) -> FreqSymbols {
        FreqSymbols(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

/// Oversampled discrete waveform of one OFDM symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSignal {
    pub samples: Vec<Complex64>,
    pub sample_period: f64,
}

impl TimeSignal {
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn powers(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|c| c.norm_sqr())
    }

    pub fn peak_power(&self) -> f64 {
        self.powers().fold(0.0, f64::max)
    }
}
