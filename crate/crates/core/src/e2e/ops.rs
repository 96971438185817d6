//! Graph nodes specific to the transceiver: power normalization, the
//! oversampled IDFT, and the three loss terms.
//!
//! Complex vectors travel as `[B, N, 2]` tensors of interleaved (re, im).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::{CustomOp, Graph, Tensor, Var};
use crate::waveform::{GramPair, OversampledIdft};

fn batch_of(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [b, n, 2] => Ok((*b, *n)),
        s => Err(Error::ShapeMismatch(format!("expected [B, N, 2], got {s:?}"))),
    }
}

struct PowerNormalize {
    divisor: f64,
    count: f64,
}

impl CustomOp for PowerNormalize {
    fn name(&self) -> &'static str {
        "power_normalize"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let x = inputs[0].data();
        let s = self.divisor;
        let gx_dot: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        let k = gx_dot / (self.count * s * s * s);
        vec![Some(g.iter().zip(x).map(|(gi, xi)| gi / s - xi * k).collect())]
    }
}

/// `x / sqrt(sum |x|^2 / (N B))`, so the batch carries `N` units of energy
/// per symbol on average. Returns the node and the divisor used.
pub fn power_normalize(g: &mut Graph, x: Var) -> Result<(Var, f64)> {
    let xv = g.value(x);
    let (b, n) = batch_of(xv)?;
    let count = (b * n) as f64;
    let energy: f64 = xv.data().iter().map(|v| v * v).sum();
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    let divisor = (energy / count).sqrt();
    let out = Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|v| v / divisor).collect())?;
    Ok((g.custom(vec![x], out, Box::new(PowerNormalize { divisor, count })), divisor))
}

struct Idft {
    plan: Arc<OversampledIdft>,
    batch: usize,
}

impl CustomOp for Idft {
    fn name(&self) -> &'static str {
        "oversampled_idft"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        vec![Some(self.plan.adjoint_pairs(g, self.batch))]
    }
}

/// `[B, N, 2] -> [B, N·O_s, 2]` unitary oversampled IDFT.
pub fn idft(g: &mut Graph, plan: &Arc<OversampledIdft>, x: Var) -> Result<Var> {
    let (b, n) = batch_of(g.value(x))?;
    if n != plan.grid().n() {
        return Err(Error::LengthMismatch { expected: plan.grid().n(), got: n });
    }
    let z = plan.apply_pairs(g.value(x).data(), b);
    let out = Tensor::new(vec![b, plan.grid().n_samples(), 2], z)?;
    Ok(g.custom(vec![x], out, Box::new(Idft { plan: plan.clone(), batch: b })))
}

struct PaprHinge {
    gamma: f64,
    mean_power: f64,
}

impl CustomOp for PaprHinge {
    fn name(&self) -> &'static str {
        "papr_hinge"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let z = inputs[0].data();
        let count = (z.len() / 2) as f64;
        let p = self.mean_power;
        let mut active_power = 0.0;
        let mut active = vec![false; z.len() / 2];
        for (a, c) in active.iter_mut().zip(z.chunks_exact(2)) {
            let pw = c[0] * c[0] + c[1] * c[1];
            if pw / p > self.gamma {
                *a = true;
                active_power += pw;
            }
        }
        let direct = g[0] * 2.0 / (count * p);
        let through_mean = g[0] * 2.0 * active_power / (count * count * p * p);
        let mut out = vec![0.0; z.len()];
        for ((o, c), &a) in out.chunks_exact_mut(2).zip(z.chunks_exact(2)).zip(&active) {
            let w = if a { direct } else { 0.0 } - through_mean;
            o[0] = w * c[0];
            o[1] = w * c[1];
        }
        vec![Some(out)]
    }
}

/// Mean over all time samples of `max(0, p_k - gamma)`, where `p_k` is the
/// instantaneous power divided by the batch mean power.
pub fn papr_hinge(g: &mut Graph, z: Var, gamma: f64) -> Result<Var> {
    let zv = g.value(z);
    batch_of(zv)?;
    let powers: Vec<f64> = zv.data().chunks_exact(2).map(|c| c[0] * c[0] + c[1] * c[1]).collect();
    let count = powers.len() as f64;
    let mean_power = powers.iter().sum::<f64>() / count;
    if !(mean_power > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let loss = powers.iter().map(|p| (p / mean_power - gamma).max(0.0)).sum::<f64>() / count;
    Ok(g.custom(vec![z], Tensor::scalar(loss), Box::new(PaprHinge { gamma, mean_power })))
}

struct AclrRatio {
    gram: Arc<GramPair>,
    total: f64,
    inband: f64,
}

/// `V x` applied to each real/imag column of every batch element.
fn apply_v(v: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    let b = x.len() / (2 * n);
    let mut out = vec![0.0; x.len()];
    for bi in 0..b {
        let xs = &x[bi * 2 * n..(bi + 1) * 2 * n];
        let os = &mut out[bi * 2 * n..(bi + 1) * 2 * n];
        unsafe {
            matrixmultiply::dgemm(
                n, n, 2, 1.0,
                v.as_ptr(), n as isize, 1,
                xs.as_ptr(), 2, 1,
                0.0, os.as_mut_ptr(), 2, 1,
            );
        }
    }
    out
}

impl CustomOp for AclrRatio {
    fn name(&self) -> &'static str {
        "aclr_ratio"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let x = inputs[0].data();
        let vx = apply_v(self.gram.v(), self.gram.n(), x);
        let a = 2.0 * g[0] / self.inband;
        let b = 2.0 * g[0] * self.total / (self.inband * self.inband);
        vec![Some(x.iter().zip(&vx).map(|(xi, vi)| a * xi - b * vi).collect())]
    }
}

/// `sum x^H W x / sum x^H V x - 1 - beta` over the batch. `W` is the
/// identity, so the numerator is the plain energy.
pub fn aclr_ratio(g: &mut Graph, gram: &Arc<GramPair>, x: Var, beta: f64) -> Result<Var> {
    let xv = g.value(x);
    let (_, n) = batch_of(xv)?;
    if n != gram.n() {
        return Err(Error::LengthMismatch { expected: gram.n(), got: n });
    }
    let total: f64 = xv.data().iter().map(|v| v * v).sum();
    let vx = apply_v(gram.v(), n, xv.data());
    let inband: f64 = xv.data().iter().zip(&vx).map(|(a, b)| a * b).sum();
    if !(inband > 0.0) {
        return Err(Error::ZeroInbandEnergy);
    }
    let loss = total / inband - 1.0 - beta;
    Ok(g.custom(vec![x], Tensor::scalar(loss), Box::new(AclrRatio { gram: gram.clone(), total, inband })))
}

struct BceLogits {
    bits: Vec<f64>,
    scale: f64,
}

impl CustomOp for BceLogits {
    fn name(&self) -> &'static str {
        "bce_logits"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, g: &[f64]) -> Vec<Option<Vec<f64>>> {
        let l = inputs[0].data();
        let out = l
            .iter()
            .zip(&self.bits)
            .map(|(&li, &b)| g[0] * self.scale * (sigmoid(li) - b))
            .collect();
        vec![Some(out)]
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Total binary cross-entropy in bits of `[B, N, K]` LLRs against 0/1
/// targets, divided by `B·N` (bits per subcarrier).
pub fn bce_logits(g: &mut Graph, llrs: Var, bits: &[u8]) -> Result<Var> {
    let lv = g.value(llrs);
    let shape = lv.shape();
    if shape.len() != 3 || bits.len() != lv.len() {
        return Err(Error::ShapeMismatch(format!("llrs {shape:?} vs {} bits", bits.len())));
    }
    let rows = (shape[0] * shape[1]) as f64;
    let total: f64 = lv.data().iter().zip(bits).map(|(&l, &b)| crate::bits::bit_cross_entropy(l, b)).sum();
    let op = BceLogits {
        bits: bits.iter().map(|&b| b as f64).collect(),
        scale: 1.0 / (rows * std::f64::consts::LN_2),
    };
    Ok(g.custom(vec![llrs], Tensor::scalar(total / rows), Box::new(op)))
}
