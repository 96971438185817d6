//! In-band (`V`) and total (`W`) energy Gram matrices.
//!
//! `v_ab = ∫_{-N/2}^{N/2} sinc(f - a) sinc(f - b) df` is evaluated with a
//! composite Gauss-Legendre rule; `W` is the identity because the complex
//! exponentials of distinct subcarriers integrate to zero over one symbol.

use serde::{Deserialize, Serialize};

use super::grid::SubcarrierGrid;
use super::symbols::FreqSymbols;
use crate::error::{Error, Result};

const PANEL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Quadrature nodes per unit frequency interval; a multiple of 16, at
    /// least 64.
    pub nodes_per_unit: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig { nodes_per_unit: 128 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_unit < 64 || !self.nodes_per_unit.is_multiple_of(PANEL_ORDER) {
            return Err(Error::InvalidQuadrature(format!(
                "nodes_per_unit must be a multiple of {PANEL_ORDER} and at least 64, got {}",
                self.nodes_per_unit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramPair {
    n: usize,
    /// Row-major `N x N`, real symmetric.
    v: Vec<f64>,
    w: Vec<f64>,
}

pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        let pu = std::f64::consts::PI * u;
        1.0 - pu * pu / 6.0
    } else {
        let pu = std::f64::consts::PI * u;
        pu.sin() / pu
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

pub fn compute_gram(grid: &SubcarrierGrid, quadrature: &QuadratureConfig) -> Result<GramPair> {
    quadrature.validate()?;
    let n = grid.n();
    let (gl_x, gl_w) = gauss_legendre(PANEL_ORDER);
    let panels_per_unit = quadrature.nodes_per_unit / PANEL_ORDER;
    let width = 1.0 / panels_per_unit as f64;
    let n_panels = n * panels_per_unit;
    let q = n_panels * PANEL_ORDER;
    let lo = -(n as f64) / 2.0;

    let mut freqs = Vec::with_capacity(q);
    let mut sqrt_w = Vec::with_capacity(q);
    for p in 0..n_panels {
        let mid = lo + (p as f64 + 0.5) * width;
        for (x, w) in gl_x.iter().zip(&gl_w) {
            freqs.push(mid + 0.5 * width * x);
            sqrt_w.push((0.5 * width * w).sqrt());
        }
    }

    // S[a][q] = sinc(f_q - a) sqrt(w_q); V = S S^T.
    let mut table = vec![0.0; n * q];
    for (pos, a) in grid.indices().enumerate() {
        let row = &mut table[pos * q..(pos + 1) * q];
        for ((t, f), sw) in row.iter_mut().zip(&freqs).zip(&sqrt_w) {
            *t = sinc(f - a as f64) * sw;
        }
    }
    let mut v = vec![0.0; n * n];
    unsafe {
        matrixmultiply::dgemm(
            n, q, n, 1.0,
            table.as_ptr(), q as isize, 1,
            table.as_ptr(), 1, q as isize,
            0.0, v.as_mut_ptr(), n as isize, 1,
        );
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let s = 0.5 * (v[a * n + b] + v[b * n + a]);
            v[a * n + b] = s;
            v[b * n + a] = s;
        }
    }

    let mut w = vec![0.0; n * n];
    for a in 0..n {
        w[a * n + a] = 1.0;
    }
    Ok(GramPair { n, v, w })
}

/// `x^H M x` for a real symmetric `M`.
fn quad_form(m: &[f64], n: usize, x: &FreqSymbols) -> f64 {
    let mut acc = 0.0;
    for a in 0..n {
        let row = &m[a * n..(a + 1) * n];
        let (mut re, mut im) = (0.0, 0.0);
        for (mab, xb) in row.iter().zip(&x.0) {
            re += mab * xb.re;
            im += mab * xb.im;
        }
        acc += x.0[a].re * re + x.0[a].im * im;
    }
    acc
}

impl GramPair {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn v_entry(&self, a: usize, b: usize) -> f64 {
        self.v[a * self.n + b]
    }

    pub fn trace_v(&self) -> f64 {
        (0..self.n).map(|a| self.v_entry(a, a)).sum()
    }

    pub fn inband_energy(&self, x: &FreqSymbols) -> f64 {
        quad_form(&self.v, self.n, x)
    }

    pub fn total_energy(&self, x: &FreqSymbols) -> f64 {
        quad_form(&self.w, self.n, x)
    }
}
