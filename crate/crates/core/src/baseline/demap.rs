//! Exact log-MAP soft demapping for AWGN.

use super::qam::{label_bits, QamConstellation};
use crate::bits::LlrGrid;
use crate::error::{Error, Result};
use crate::waveform::FreqSymbols;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `LLR(n, k) = ln sum_{c: b_k=1} exp(-|y_n - c|^2 / s2) - ln sum_{c: b_k=0} ...`
/// for each storage position in `positions`, in order.
pub fn awgn_llr_demap(
    y: &FreqSymbols,
    noise_var: f64,
    constellation: &QamConstellation,
    positions: &[usize],
) -> Result<LlrGrid> {
    if !(noise_var > 0.0) {
        return Err(Error::NonPositiveNoise(noise_var));
    }
    let k = constellation.bits_per_symbol();
    let labels: Vec<[u8; 4]> = (0..constellation.points.len()).map(label_bits).collect();
    let mut llrs = Vec::with_capacity(positions.len() * k);
    let mut metric = vec![0.0; constellation.points.len()];
    for &pos in positions {
        let yn = y.0[pos];
        for (m, c) in metric.iter_mut().zip(&constellation.points) {
            *m = -(yn - c).norm_sqr() / noise_var;
        }
        for bit in 0..k {
            let ones = metric.iter().zip(&labels).filter(|(_, l)| l[bit] == 1).map(|(m, _)| *m);
            let zeros = metric.iter().zip(&labels).filter(|(_, l)| l[bit] == 0).map(|(m, _)| *m);
            llrs.push(log_sum_exp(ones) - log_sum_exp(zeros));
        }
    }
    Ok(LlrGrid { rows: positions.len(), k, llrs })
}
