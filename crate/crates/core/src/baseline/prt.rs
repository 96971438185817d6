use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::SubcarrierGrid;

/// Split of the grid positions into reserved (peak-reduction) and data tones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrtAllocation {
    n: usize,
    reserved: Vec<usize>,
    data: Vec<usize>,
}

impl PrtAllocation {
    pub fn none(grid: &SubcarrierGrid) -> Self {
        PrtAllocation { n: grid.n(), reserved: Vec::new(), data: (0..grid.n()).collect() }
    }

    /// `positions` are storage positions (0 = lowest tone).
    pub fn from_reserved(grid: &SubcarrierGrid, positions: &[usize]) -> Result<Self> {
        let n = grid.n();
        let mut mask = vec![false; n];
        for &p in positions {
            if p >= n || mask[p] {
                return Err(Error::InvalidArgument(format!("bad reserved position {p}")));
            }
            mask[p] = true;
        }
        let reserved = (0..n).filter(|&p| mask[p]).collect();
        let data = (0..n).filter(|&p| !mask[p]).collect();
        Ok(PrtAllocation { n, reserved, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reserved(&self) -> &[usize] {
        &self.reserved
    }

    pub fn data(&self) -> &[usize] {
        &self.data
    }
}

/// Uniformly random `r`-subset of the grid, drawn fresh per transmission.
pub fn sample_prt(grid: &SubcarrierGrid, r: usize, rng: &mut impl Rng) -> Result<PrtAllocation> {
    if r > grid.n() {
        return Err(Error::ReservedOutOfRange { r, n: grid.n() });
    }
    let picks = rand::seq::index::sample(rng, grid.n(), r).into_vec();
    PrtAllocation::from_reserved(grid, &picks)
}
