use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `rows x k` matrix of payload bits (one row per subcarrier).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitGrid {
    rows: usize,
    k: usize,
    bits: Vec<u8>,
}

impl BitGrid {
    pub fn new(rows: usize, k: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != rows * k {
            return Err(Error::WrongBitCount { expected: rows * k, got: bits.len() });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        Ok(BitGrid { rows, k, bits })
    }

    pub fn zeros(rows: usize, k: usize) -> Self {
        BitGrid { rows, k, bits: vec![0; rows * k] }
    }

    /// I.i.d. Bernoulli(1/2) bits.
    pub fn random(rows: usize, k: usize, rng: &mut impl Rng) -> Self {
        let bits = (0..rows * k).map(|_| rng.random::<bool>() as u8).collect();
        BitGrid { rows, k, bits }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.k..(r + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }
}

/// Row-major `rows x k` log-likelihood ratios, `ln P(b=1|y) / P(b=0|y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlrGrid {
    pub rows: usize,
    pub k: usize,
    pub llrs: Vec<f64>,
}

impl LlrGrid {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.llrs[r * self.k..(r + 1) * self.k]
    }

    pub fn hard_decisions(&self) -> Vec<u8> {
        self.llrs.iter().map(|&l| (l > 0.0) as u8).collect()
    }
}

/// `-log2 P(bit | llr)` with `P(1) = sigmoid(llr)`, computed as a stable
/// softplus.
pub fn bit_cross_entropy(llr: f64, bit: u8) -> f64 {
    let u = if bit == 1 { -llr } else { llr };
    let softplus = u.max(0.0) + (-u.abs()).exp().ln_1p();
    softplus / std::f64::consts::LN_2
}
