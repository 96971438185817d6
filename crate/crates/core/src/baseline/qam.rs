//! Gray-labeled 16-QAM.
//!
//! Each axis carries two bits with the reflected code `00 -> -3`,
//! `01 -> -1`, `11 -> +1`, `10 -> +3`; bits `b0 b1` select the in-phase
//! level and `b2 b3` the quadrature level. Points are scaled by `1/sqrt(10)`
//! for unit mean energy. Label `b0 b1 b2 b3 = 0000` is the corner
//! `(-3 - 3i)/sqrt(10)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::prt::PrtAllocation;
use crate::bits::BitGrid;
use crate::error::{Error, Result};
use crate::waveform::FreqSymbols;

pub const BITS_PER_SYMBOL: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QamConstellation {
    /// Point for each 4-bit label, indexed by label value (b0 is the MSB).
    pub points: Vec<Complex64>,
}

fn gray_level(hi: u8, lo: u8) -> f64 {
    match (hi, lo) {
        (0, 0) => -3.0,
        (0, 1) => -1.0,
        (1, 1) => 1.0,
        _ => 3.0,
    }
}

pub fn label_bits(label: usize) -> [u8; BITS_PER_SYMBOL] {
    [
        ((label >> 3) & 1) as u8,
        ((label >> 2) & 1) as u8,
        ((label >> 1) & 1) as u8,
        (label & 1) as u8,
    ]
}

pub fn label_of(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

impl QamConstellation {
    pub fn qam16() -> Self {
        let scale = 1.0 / 10f64.sqrt();
        let points = (0..16)
            .map(|label| {
                let b = label_bits(label);
                Complex64::new(gray_level(b[0], b[1]), gray_level(b[2], b[3])) * scale
            })
            .collect();
        QamConstellation { points }
    }

    pub fn bits_per_symbol(&self) -> usize {
        BITS_PER_SYMBOL
    }

    pub fn map_bits(&self, bits: &[u8]) -> Complex64 {
        self.points[label_of(bits)]
    }

    /// `label,bits,re,im` table for audit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,bits,re,im\n");
        for (label, p) in self.points.iter().enumerate() {
            let b = label_bits(label);
            out.push_str(&format!("{label},{}{}{}{},{:e},{:e}\n", b[0], b[1], b[2], b[3], p.re, p.im));
        }
        out
    }
}

/// Map 4 bits per data tone; reserved tones are left at zero.
pub fn qam16_map(
    bits: &BitGrid,
    alloc: &PrtAllocation,
    constellation: &QamConstellation,
) -> Result<FreqSymbols> {
    if bits.k() != BITS_PER_SYMBOL || bits.rows() != alloc.data().len() {
        return Err(Error::WrongBitCount {
            expected: alloc.data().len() * BITS_PER_SYMBOL,
            got: bits.rows() * bits.k(),
        });
    }
    let mut x = FreqSymbols::zeros(alloc.n());
    for (row, &pos) in alloc.data().iter().enumerate() {
        x.0[pos] = constellation.map_bits(bits.row(row));
    }
    Ok(x)
}
