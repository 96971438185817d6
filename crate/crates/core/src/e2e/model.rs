//! Neural transmitter and receiver.
//!
//! The transmitter maps `[B, N, K]` bits to `[B, N, 2]` (re, im) pairs and
//! normalizes the batch energy; the receiver maps noisy `[B, N, 2]` symbols to
//! `[B, N, K]` LLRs. Both are [`ResNet1d`] stacks convolving along the
//! subcarrier axis.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::lagrangian::{augmented_lagrangian_node, ConstraintState};
use super::ops::{aclr_ratio, bce_logits, idft, papr_hinge, power_normalize};
use crate::baseline::noise_variance;
use crate::bits::{BitGrid, LlrGrid};
use crate::error::{Error, Result};
use crate::nn::{Graph, Mode, ParamId, ParamStore, ResNet1d, ResNetSpec, Tensor, Var};
use crate::rng::stream;
use crate::waveform::{FreqSymbols, GramPair, OversampledIdft, SubcarrierGrid};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub filters: usize,
    /// `(kernel, dilation)` of each residual block.
    pub blocks: Vec<(usize, usize)>,
}

impl ArchConfig {
    pub fn with_filters(filters: usize) -> Self {
        ArchConfig { filters, blocks: ResNetSpec::paper(1, 1, filters).blocks }
    }
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::with_filters(128)
    }
}

/// Momentum of the running average of the transmitter's normalization divisor.
const DIVISOR_MOMENTUM: f64 = 0.99;

pub struct Transceiver {
    pub grid: SubcarrierGrid,
    pub k: usize,
    pub arch: ArchConfig,
    pub tx: ResNet1d,
    pub rx: ResNet1d,
    pub store: ParamStore,
    divisor_avg: ParamId,
    divisor_updates: ParamId,
}

/// Everything a forward pass needs besides the parameters.
#[derive(Clone)]
pub struct LossContext {
    pub plan: Arc<OversampledIdft>,
    pub gram: Arc<GramPair>,
    /// Linear peak-power threshold relative to the mean power.
    pub gamma_peak: f64,
    /// Linear ACLR target.
    pub beta_leak: f64,
}

/// Nodes of one recorded forward pass.
pub struct Forward {
    pub x: Var,
    pub llrs: Var,
    pub bce: Var,
    pub l_peak: Var,
    pub l_leak: Var,
}

impl Transceiver {
    pub fn new(grid: SubcarrierGrid, k: usize, arch: &ArchConfig, seed: u64) -> Result<Self> {
        if k == 0 || arch.filters == 0 {
            return Err(Error::InvalidArgument("K and filter count must be positive".into()));
        }
        let mut rng = stream(seed, "init");
        let mut store = ParamStore::new();
        let tx_spec = ResNetSpec { in_channels: k, out_channels: 2, filters: arch.filters, blocks: arch.blocks.clone() };
        let rx_spec = ResNetSpec { in_channels: 2, out_channels: k, filters: arch.filters, blocks: arch.blocks.clone() };
        let tx = ResNet1d::new(&mut store, "tx", &tx_spec, &mut rng)?;
        let rx = ResNet1d::new(&mut store, "rx", &rx_spec, &mut rng)?;
        let divisor_avg = store.add("tx.divisor_avg", Tensor::zeros(vec![1]), false)?;
        let divisor_updates = store.add("tx.divisor_updates", Tensor::zeros(vec![1]), false)?;
        Ok(Transceiver { grid, k, arch: arch.clone(), tx, rx, store, divisor_avg, divisor_updates })
    }

    /// Rebuild the architecture and copy every tensor from `store`.
    pub fn from_store(grid: SubcarrierGrid, k: usize, arch: &ArchConfig, store: &ParamStore) -> Result<Self> {
        let mut t = Self::new(grid, k, arch, 0)?;
        t.store.load_from(store)?;
        Ok(t)
    }

    /// Running (debiased) average of the training-time normalization divisor.
    pub fn frozen_divisor(&self) -> Option<f64> {
        let t = self.store.get(self.divisor_updates).data()[0];
        (t > 0.0).then(|| self.store.get(self.divisor_avg).data()[0] / (1.0 - DIVISOR_MOMENTUM.powf(t)))
    }

    pub fn bits_tensor(&self, bits: &BitGrid) -> Result<Tensor> {
        let n = self.grid.n();
        if bits.k() != self.k || !bits.rows().is_multiple_of(n) || bits.rows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "bits {}x{} do not form whole symbols of {n}x{}",
                bits.rows(),
                bits.k(),
                self.k
            )));
        }
        Tensor::new(vec![bits.rows() / n, n, self.k], bits.as_slice().iter().map(|&b| b as f64).collect())
    }

    /// Normalized transmit symbols `[B, N, 2]`.
    ///
    /// Training and probing divide by the batch's own RMS; inference divides
    /// by the running average recorded during training, so each symbol is
    /// mapped independently of its batch.
    pub fn transmit(&mut self, g: &mut Graph, bits: &BitGrid, mode: Mode) -> Result<Var> {
        let input = g.input(self.bits_tensor(bits)?);
        let raw = self.tx.forward(g, &mut self.store, input, mode)?;
        match (mode, self.frozen_divisor()) {
            (Mode::Infer, Some(d)) => Ok(g.scale(raw, 1.0 / d)),
            _ => {
                let (x, d) = power_normalize(g, raw)?;
                if mode == Mode::Train {
                    let avg = &mut self.store.get_mut(self.divisor_avg).data_mut()[0];
                    *avg = DIVISOR_MOMENTUM * *avg + (1.0 - DIVISOR_MOMENTUM) * d;
                    self.store.get_mut(self.divisor_updates).data_mut()[0] += 1.0;
                }
                Ok(x)
            }
        }
    }

    /// LLRs `[B, N, K]` from received `[B, N, 2]` symbols.
    pub fn receive(&mut self, g: &mut Graph, y: Var, mode: Mode) -> Result<Var> {
        self.rx.forward(g, &mut self.store, y, mode)
    }

    /// Transmit, add `noise`, receive, and record the three loss terms.
    pub fn forward(&mut self, g: &mut Graph, ctx: &LossContext, bits: &BitGrid, noise: &Tensor, mode: Mode) -> Result<Forward> {
        let x = self.transmit(g, bits, mode)?;
        let y = g.add_const(x, noise)?;
        let llrs = self.receive(g, y, mode)?;
        let bce = bce_logits(g, llrs, bits.as_slice())?;
        let z = idft(g, &ctx.plan, x)?;
        let l_peak = papr_hinge(g, z, ctx.gamma_peak)?;
        let l_leak = aclr_ratio(g, &ctx.gram, x, ctx.beta_leak)?;
        Ok(Forward { x, llrs, bce, l_peak, l_leak })
    }

    /// Forward pass plus the augmented Lagrangian node.
    pub fn lagrangian(
        &mut self,
        g: &mut Graph,
        ctx: &LossContext,
        bits: &BitGrid,
        noise: &Tensor,
        state: &ConstraintState,
        mode: Mode,
    ) -> Result<(Forward, Var)> {
        let f = self.forward(g, ctx, bits, noise, mode)?;
        let total = augmented_lagrangian_node(g, f.bce, f.l_peak, f.l_leak, state)?;
        Ok((f, total))
    }
}

/// Complex AWGN on `[B, N, 2]` pairs for the given SNR (variance per subcarrier).
pub fn noise_tensor(batch: usize, n: usize, snr_db: f64, rng: &mut impl Rng) -> Tensor {
    let s = (noise_variance(snr_db) / 2.0).sqrt();
    let data = (0..batch * n * 2)
        .map(|_| if s == 0.0 { 0.0 } else { s * rng.sample::<f64, _>(StandardNormal) })
        .collect();
    Tensor::new(vec![batch, n, 2], data).expect("shape matches data")
}

/// `[B, N, 2]` pairs to one [`FreqSymbols`] per batch element.
pub fn to_symbols(t: &Tensor) -> Vec<FreqSymbols> {
    let n = t.shape()[1];
    t.data()
        .chunks_exact(2 * n)
        .map(|row| FreqSymbols(row.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()))
        .collect()
}

/// `[B, N, K]` LLRs as a grid of `B·N` rows.
pub fn to_llr_grid(t: &Tensor) -> LlrGrid {
    let s = t.shape();
    LlrGrid { rows: s[0] * s[1], k: s[2], llrs: t.data().to_vec() }
}
