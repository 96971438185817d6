//! Separable convolution, batch normalization and pre-activation residual blocks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, NormStats, Var};
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// How batch normalization treats its statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics updated.
    Train,
    /// Batch statistics; running statistics left alone (constraint probes).
    Probe,
    /// Running statistics.
    Infer,
}

fn he_uniform<R: Rng>(rng: &mut R, fan_in: usize, len: usize) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..len).map(|_| rng.random_range(-limit..limit)).collect()
}

#[derive(Debug, Clone)]
pub struct SepConv1d {
    pub depthwise: ParamId,
    pub pointwise: ParamId,
    pub bias: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl SepConv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel.is_multiple_of(2) || dilation == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "{name}: kernel {kernel} must be odd, dilation {dilation} and channels positive"
            )));
        }
        let dw = he_uniform(rng, kernel, in_channels * kernel);
        let pw = he_uniform(rng, in_channels, out_channels * in_channels);
        Ok(SepConv1d {
            depthwise: store.add(&format!("{name}.depthwise"), Tensor::new(vec![in_channels, kernel], dw)?, true)?,
            pointwise: store.add(&format!("{name}.pointwise"), Tensor::new(vec![out_channels, in_channels], pw)?, true)?,
            bias: store.add(&format!("{name}.bias"), Tensor::zeros(vec![out_channels]), true)?,
            in_channels,
            out_channels,
            kernel,
            dilation,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let dw = g.param(store, self.depthwise);
        let pw = g.param(store, self.pointwise);
        let b = g.param(store, self.bias);
        g.sepconv(x, dw, pw, b, self.dilation)
    }
}

/// Per-channel batch normalization over every axis but the last.
///
/// Running statistics are an exponential moving average debiased by
/// `1 - momentum^t`, so they are usable long before `1/(1-momentum)` updates.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub scale: ParamId,
    pub shift: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    /// Number of running-stat updates, kept as a one-element buffer so it
    /// travels with checkpoints.
    pub updates: ParamId,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm1d {
    pub const MOMENTUM: f64 = 0.99;
    pub const EPS: f64 = 1e-3;

    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        Self::with_params(store, name, channels, Self::MOMENTUM, Self::EPS)
    }

    pub fn with_params(store: &mut ParamStore, name: &str, channels: usize, momentum: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) || eps <= 0.0 {
            return Err(Error::InvalidArgument(format!("{name}: momentum {momentum}, eps {eps}")));
        }
        Ok(BatchNorm1d {
            scale: store.add(&format!("{name}.scale"), Tensor::filled(vec![channels], 1.0), true)?,
            shift: store.add(&format!("{name}.shift"), Tensor::zeros(vec![channels]), true)?,
            running_mean: store.add(&format!("{name}.running_mean"), Tensor::zeros(vec![channels]), false)?,
            running_var: store.add(&format!("{name}.running_var"), Tensor::zeros(vec![channels]), false)?,
            updates: store.add(&format!("{name}.updates"), Tensor::zeros(vec![1]), false)?,
            momentum,
            eps,
        })
    }

    /// Debiased running mean and variance.
    pub fn running_stats(&self, store: &ParamStore) -> (Vec<f64>, Vec<f64>) {
        let t = store.get(self.updates).data()[0];
        let c = store.get(self.running_mean).len();
        if t == 0.0 {
            return (vec![0.0; c], vec![1.0; c]);
        }
        let debias = 1.0 - self.momentum.powf(t);
        let m = store.get(self.running_mean).data().iter().map(|v| v / debias).collect();
        let v = store.get(self.running_var).data().iter().map(|v| (v / debias).max(0.0)).collect();
        (m, v)
    }

    pub fn forward(&self, g: &mut Graph, store: &mut ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let scale = g.param(store, self.scale);
        let shift = g.param(store, self.shift);
        let stats = match mode {
            Mode::Train | Mode::Probe => NormStats::Batch { eps: self.eps },
            Mode::Infer => {
                let (mean, var) = self.running_stats(store);
                NormStats::Fixed { mean, var, eps: self.eps }
            }
        };
        let (y, mean, var) = g.batchnorm(x, scale, shift, &stats)?;
        if mode == Mode::Train {
            let a = self.momentum;
            for (r, m) in store.get_mut(self.running_mean).data_mut().iter_mut().zip(&mean) {
                *r = a * *r + (1.0 - a) * m;
            }
            for (r, v) in store.get_mut(self.running_var).data_mut().iter_mut().zip(&var) {
                *r = a * *r + (1.0 - a) * v;
            }
            store.get_mut(self.updates).data_mut()[0] += 1.0;
        }
        Ok(y)
    }
}

/// `x + conv2(relu(bn2(conv1(relu(bn1(x))))))`.
#[derive(Debug, Clone)]
pub struct ResBlock {
    pub bn1: BatchNorm1d,
    pub conv1: SepConv1d,
    pub bn2: BatchNorm1d,
    pub conv2: SepConv1d,
}

impl ResBlock {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(ResBlock {
            bn1: BatchNorm1d::new(store, &format!("{name}.bn1"), channels)?,
            conv1: SepConv1d::new(store, &format!("{name}.conv1"), channels, channels, kernel, dilation, rng)?,
            bn2: BatchNorm1d::new(store, &format!("{name}.bn2"), channels)?,
            conv2: SepConv1d::new(store, &format!("{name}.conv2"), channels, channels, kernel, dilation, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &mut ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let h = self.bn1.forward(g, store, x, mode)?;
        let h = g.relu(h);
        let h = self.conv1.forward(g, store, h)?;
        let h = self.bn2.forward(g, store, h, mode)?;
        let h = g.relu(h);
        let h = self.conv2.forward(g, store, h)?;
        g.add(x, h)
    }
}

/// Layer sizes of a [`ResNet1d`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResNetSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub filters: usize,
    /// `(kernel, dilation)` per residual block.
    pub blocks: Vec<(usize, usize)>,
}

impl ResNetSpec {
    /// The five-block layout used for both transmitter and receiver.
    pub fn paper(in_channels: usize, out_channels: usize, filters: usize) -> Self {
        ResNetSpec {
            in_channels,
            out_channels,
            filters,
            blocks: vec![(3, 1), (9, 2), (15, 4), (9, 2), (3, 1)],
        }
    }
}

/// Entry conv (k=1) → residual blocks → BN → ReLU → exit conv (k=1).
#[derive(Debug, Clone)]
pub struct ResNet1d {
    pub spec: ResNetSpec,
    pub entry: SepConv1d,
    pub blocks: Vec<ResBlock>,
    pub exit_bn: BatchNorm1d,
    pub exit: SepConv1d,
}

impl ResNet1d {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, spec: &ResNetSpec, rng: &mut R) -> Result<Self> {
        let f = spec.filters;
        let entry = SepConv1d::new(store, &format!("{name}.entry"), spec.in_channels, f, 1, 1, rng)?;
        let blocks = spec
            .blocks
            .iter()
            .enumerate()
            .map(|(i, &(k, d))| ResBlock::new(store, &format!("{name}.block{i}"), f, k, d, rng))
            .collect::<Result<Vec<_>>>()?;
        let exit_bn = BatchNorm1d::new(store, &format!("{name}.exit_bn"), f)?;
        let exit = SepConv1d::new(store, &format!("{name}.exit"), f, spec.out_channels, 1, 1, rng)?;
        Ok(ResNet1d { spec: spec.clone(), entry, blocks, exit_bn, exit })
    }

    pub fn forward(&self, g: &mut Graph, store: &mut ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let mut h = self.entry.forward(g, store, x)?;
        for block in &self.blocks {
            h = block.forward(g, store, h, mode)?;
        }
        let h = self.exit_bn.forward(g, store, h, mode)?;
        let h = g.relu(h);
        self.exit.forward(g, store, h)
    }
}
