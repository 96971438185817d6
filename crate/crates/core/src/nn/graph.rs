//! Tensor-level reverse-mode differentiation.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its value
//! and whatever it needs for the backward pass. Nodes are appended in
//! topological order, so [`Graph::backward`] walks the tape in reverse and
//! accumulates gradients in a fixed order.
//!
//! Operations that do not belong to the core set implement [`CustomOp`].

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// A differentiable operation defined outside the core op set.
///
/// The forward value is computed by the caller; `backward` maps the output
/// gradient to one gradient per input (`None` for inputs that need none).
pub trait CustomOp {
    fn name(&self) -> &'static str;
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad_out: &[f64]) -> Vec<Option<Vec<f64>>>;
}

/// Statistics used by a batch-normalization node.
#[derive(Debug, Clone)]
pub enum NormStats {
    /// Normalize with the statistics of the current batch.
    Batch { eps: f64 },
    /// Normalize with fixed per-channel statistics.
    Fixed { mean: Vec<f64>, var: Vec<f64>, eps: f64 },
}

enum Op {
    Leaf,
    Param(ParamId),
    SepConv {
        x: Var,
        dw: Var,
        pw: Var,
        bias: Var,
        kernel: usize,
        dilation: usize,
        depthwise: Vec<f64>,
    },
    BatchNorm {
        x: Var,
        scale: Var,
        shift: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Relu(Var),
    Add(Var, Var),
    AddConst(Var),
    Scale(Var, f64),
    AddScalar(Var),
    Square(Var),
    Sum(Var),
    Custom { inputs: Vec<Var>, op: Box<dyn CustomOp> },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(&g) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

/// `C = A B` with explicit strides (row stride, column stride).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize, k: usize, n: usize,
    a: &[f64], rsa: usize, csa: usize,
    b: &[f64], rsb: usize, csb: usize,
    beta: f64, c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0,
            a.as_ptr(), rsa as isize, csa as isize,
            b.as_ptr(), rsb as isize, csb as isize,
            beta, c.as_mut_ptr(), n as isize, 1,
        );
    }
}

/// Depthwise weights `[C, k]` rearranged as `[k, C]`.
fn tap_major(w: &[f64], cin: usize, kernel: usize) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for c in 0..cin {
        for j in 0..kernel {
            out[j * cin + c] = w[c * kernel + j];
        }
    }
    out
}

fn tap_offsets(kernel: usize, dilation: usize) -> Vec<isize> {
    (0..kernel).map(|j| (j as isize - (kernel / 2) as isize) * dilation as isize).collect()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Constant input.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Input whose gradient is wanted.
    pub fn input_with_grad(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let trainable = store.entry(id).trainable;
        self.push(store.get(id).clone(), Op::Param(id), trainable)
    }

    /// Depthwise dilated convolution followed by a 1x1 pointwise mix.
    ///
    /// `x: [B, L, C_in]`, `dw: [C_in, k]`, `pw: [C_out, C_in]`,
    /// `bias: [C_out]` -> `[B, L, C_out]`. Zero padding of
    /// `(k - 1) * dilation / 2` on each side keeps the length.
    pub fn sepconv(&mut self, x: Var, dw: Var, pw: Var, bias: Var, dilation: usize) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let dws = self.value(dw).shape().to_vec();
        let pws = self.value(pw).shape().to_vec();
        if xs.len() != 3 || dws.len() != 2 || pws.len() != 2 {
            return Err(Error::ShapeMismatch("sepconv expects [B,L,C], [C,k], [Cout,C]".into()));
        }
        let (b, l, cin) = (xs[0], xs[1], xs[2]);
        let kernel = dws[1];
        let cout = pws[0];
        if dws[0] != cin || pws[1] != cin || self.value(bias).len() != cout {
            return Err(Error::ShapeMismatch(format!(
                "sepconv: input {xs:?}, depthwise {dws:?}, pointwise {pws:?}"
            )));
        }
        if kernel.is_multiple_of(2) || dilation == 0 {
            return Err(Error::ShapeMismatch("kernel must be odd and dilation positive".into()));
        }
        let xv = self.value(x).data();
        let wt = tap_major(self.value(dw).data(), cin, kernel);
        let offsets = tap_offsets(kernel, dilation);
        let mut depthwise = vec![0.0; b * l * cin];
        for bi in 0..b {
            let xb = &xv[bi * l * cin..(bi + 1) * l * cin];
            for (li, d) in depthwise[bi * l * cin..(bi + 1) * l * cin].chunks_exact_mut(cin).enumerate() {
                for (j, &off) in offsets.iter().enumerate() {
                    let Some(src) = li.checked_add_signed(off).filter(|&s| s < l) else { continue };
                    let s = &xb[src * cin..(src + 1) * cin];
                    for ((d, s), w) in d.iter_mut().zip(s).zip(&wt[j * cin..(j + 1) * cin]) {
                        *d += w * s;
                    }
                }
            }
        }
        let rows = b * l;
        let bv = self.value(bias).data();
        let mut out = Vec::with_capacity(rows * cout);
        for _ in 0..rows {
            out.extend_from_slice(bv);
        }
        gemm(rows, cin, cout, &depthwise, cin, 1, self.value(pw).data(), 1, cin, 1.0, &mut out);
        let needs = self.needs(x) || self.needs(dw) || self.needs(pw) || self.needs(bias);
        Ok(self.push(
            Tensor::new(vec![b, l, cout], out)?,
            Op::SepConv { x, dw, pw, bias, kernel, dilation, depthwise },
            needs,
        ))
    }

    /// Per-channel normalization of `[.., C]` followed by `scale * xhat + shift`.
    /// Returns the node and the batch mean/variance actually used.
    pub fn batchnorm(&mut self, x: Var, scale: Var, shift: Var, stats: &NormStats) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let xs = self.value(x).shape().to_vec();
        let c = *xs.last().ok_or_else(|| Error::ShapeMismatch("batchnorm on scalar".into()))?;
        if self.value(scale).len() != c || self.value(shift).len() != c {
            return Err(Error::ShapeMismatch("batchnorm scale/shift size".into()));
        }
        let xv = self.value(x).data();
        let rows = xv.len() / c;
        let (mean, var, eps, batch_stats) = match stats {
            NormStats::Batch { eps } => {
                if rows < 2 {
                    return Err(Error::BatchTooSmall(rows));
                }
                let mut mean = vec![0.0; c];
                for r in xv.chunks_exact(c) {
                    for (m, v) in mean.iter_mut().zip(r) {
                        *m += v;
                    }
                }
                for m in &mut mean {
                    *m /= rows as f64;
                }
                let mut var = vec![0.0; c];
                for r in xv.chunks_exact(c) {
                    for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                for s in &mut var {
                    *s /= rows as f64;
                }
                (mean, var, *eps, true)
            }
            NormStats::Fixed { mean, var, eps } => {
                if mean.len() != c || var.len() != c {
                    return Err(Error::ShapeMismatch("batchnorm running stats size".into()));
                }
                (mean.clone(), var.clone(), *eps, false)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let sc = self.value(scale).data();
        let sh = self.value(shift).data();
        let mut xhat = vec![0.0; xv.len()];
        let mut out = vec![0.0; xv.len()];
        for ((xr, hr), or) in xv.chunks_exact(c).zip(xhat.chunks_exact_mut(c)).zip(out.chunks_exact_mut(c)) {
            for ch in 0..c {
                let h = (xr[ch] - mean[ch]) * inv_std[ch];
                hr[ch] = h;
                or[ch] = sc[ch] * h + sh[ch];
            }
        }
        let needs = self.needs(x) || self.needs(scale) || self.needs(shift);
        let node = self.push(
            Tensor::new(xs, out)?,
            Op::BatchNorm { x, scale, shift, xhat, inv_std, batch_stats },
            needs,
        );
        Ok((node, mean, var))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a.max(0.0)).collect()).unwrap();
        let needs = self.needs(x);
        self.push(out, Op::Relu(x), needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::ShapeMismatch(format!("add {:?} + {:?}", va.shape(), vb.shape())));
        }
        let out = Tensor::new(va.shape().to_vec(), va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect())?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), needs))
    }

    /// `x + c` for a constant tensor `c` of the same shape.
    pub fn add_const(&mut self, x: Var, c: &Tensor) -> Result<Var> {
        let v = self.value(x);
        if v.shape() != c.shape() {
            return Err(Error::ShapeMismatch(format!("add_const {:?} + {:?}", v.shape(), c.shape())));
        }
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().zip(c.data()).map(|(a, b)| a + b).collect())?;
        let needs = self.needs(x);
        Ok(self.push(out, Op::AddConst(x), needs))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| a * s).collect()).unwrap();
        let needs = self.needs(x);
        self.push(out, Op::Scale(x, s), needs)
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| a + s).collect()).unwrap();
        let needs = self.needs(x);
        self.push(out, Op::AddScalar(x), needs)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|a| a * a).collect()).unwrap();
        let needs = self.needs(x);
        self.push(out, Op::Square(x), needs)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let needs = self.needs(x);
        self.push(Tensor::scalar(s), Op::Sum(x), needs)
    }

    /// Append a custom node whose forward value was computed by the caller.
    pub fn custom(&mut self, inputs: Vec<Var>, output: Tensor, op: Box<dyn CustomOp>) -> Var {
        let needs = inputs.iter().any(|&v| self.needs(v));
        self.push(output, Op::Custom { inputs, op }, needs)
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::BackwardBeforeForward);
        }
        if self.value(loss).len() != 1 {
            return Err(Error::ShapeMismatch("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let g = match &node.op {
                Op::Leaf | Op::Param(_) => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.backward_node(node, &g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn backward_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::SepConv { x, dw, pw, bias, kernel, dilation, depthwise } => {
                let xs = self.value(*x).shape();
                let (b, l, cin) = (xs[0], xs[1], xs[2]);
                let cout = node.value.shape()[2];
                let rows = b * l;
                if self.needs(*bias) {
                    let mut gb = vec![0.0; cout];
                    for r in g.chunks_exact(cout) {
                        for (a, v) in gb.iter_mut().zip(r) {
                            *a += v;
                        }
                    }
                    accumulate(&mut grads[bias.0], gb);
                }
                if self.needs(*pw) {
                    // gPW[Cout x Cin] = g^T D
                    let mut gpw = vec![0.0; cout * cin];
                    gemm(cout, rows, cin, g, 1, cout, depthwise, cin, 1, 0.0, &mut gpw);
                    accumulate(&mut grads[pw.0], gpw);
                }
                if self.needs(*x) || self.needs(*dw) {
                    // gD[rows x Cin] = g PW
                    let mut gd = vec![0.0; rows * cin];
                    gemm(rows, cout, cin, g, cout, 1, self.value(*pw).data(), cin, 1, 0.0, &mut gd);
                    let xv = self.value(*x).data();
                    let wt = tap_major(self.value(*dw).data(), cin, *kernel);
                    let offsets = tap_offsets(*kernel, *dilation);
                    let mut gx = if self.needs(*x) { Some(vec![0.0; xv.len()]) } else { None };
                    let mut gw_t = vec![0.0; cin * kernel];
                    for bi in 0..b {
                        let xb = &xv[bi * l * cin..(bi + 1) * l * cin];
                        let gdb = &gd[bi * l * cin..(bi + 1) * l * cin];
                        for (li, gdr) in gdb.chunks_exact(cin).enumerate() {
                            for (j, &off) in offsets.iter().enumerate() {
                                let Some(src) = li.checked_add_signed(off).filter(|&s| s < l) else { continue };
                                let xr = &xb[src * cin..(src + 1) * cin];
                                for ((a, g), x) in gw_t[j * cin..(j + 1) * cin].iter_mut().zip(gdr).zip(xr) {
                                    *a += g * x;
                                }
                            }
                        }
                        if let Some(gx) = gx.as_mut() {
                            // adjoint: input row s collects output rows s - off
                            for (si, gxr) in gx[bi * l * cin..(bi + 1) * l * cin].chunks_exact_mut(cin).enumerate() {
                                for (j, &off) in offsets.iter().enumerate() {
                                    let Some(dst) = si.checked_add_signed(-off).filter(|&d| d < l) else { continue };
                                    let gdr = &gdb[dst * cin..(dst + 1) * cin];
                                    for ((a, g), w) in gxr.iter_mut().zip(gdr).zip(&wt[j * cin..(j + 1) * cin]) {
                                        *a += w * g;
                                    }
                                }
                            }
                        }
                    }
                    let mut gw = vec![0.0; cin * kernel];
                    for c in 0..cin {
                        for j in 0..*kernel {
                            gw[c * kernel + j] = gw_t[j * cin + c];
                        }
                    }
                    if self.needs(*dw) {
                        accumulate(&mut grads[dw.0], gw);
                    }
                    if let Some(gx) = gx {
                        accumulate(&mut grads[x.0], gx);
                    }
                }
            }
            Op::BatchNorm { x, scale, shift, xhat, inv_std, batch_stats } => {
                let c = inv_std.len();
                let rows = xhat.len() / c;
                let mut sum_g = vec![0.0; c];
                let mut sum_gh = vec![0.0; c];
                for (gr, hr) in g.chunks_exact(c).zip(xhat.chunks_exact(c)) {
                    for ch in 0..c {
                        sum_g[ch] += gr[ch];
                        sum_gh[ch] += gr[ch] * hr[ch];
                    }
                }
                if self.needs(*x) {
                    let sc = self.value(*scale).data();
                    let mut gx = vec![0.0; g.len()];
                    let mf = rows as f64;
                    for ((gxr, gr), hr) in gx.chunks_exact_mut(c).zip(g.chunks_exact(c)).zip(xhat.chunks_exact(c)) {
                        for ch in 0..c {
                            let k = sc[ch] * inv_std[ch];
                            gxr[ch] = if *batch_stats {
                                k * (gr[ch] - sum_g[ch] / mf - hr[ch] * sum_gh[ch] / mf)
                            } else {
                                k * gr[ch]
                            };
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                if self.needs(*scale) {
                    accumulate(&mut grads[scale.0], sum_gh);
                }
                if self.needs(*shift) {
                    accumulate(&mut grads[shift.0], sum_g);
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                let gx = g.iter().zip(xv).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect();
                accumulate(&mut grads[x.0], gx);
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    accumulate(&mut grads[a.0], g.to_vec());
                }
                if self.needs(*b) {
                    accumulate(&mut grads[b.0], g.to_vec());
                }
            }
            Op::AddConst(x) | Op::AddScalar(x) => accumulate(&mut grads[x.0], g.to_vec()),
            Op::Scale(x, s) => accumulate(&mut grads[x.0], g.iter().map(|v| v * s).collect()),
            Op::Square(x) => {
                let xv = self.value(*x).data();
                accumulate(&mut grads[x.0], g.iter().zip(xv).map(|(g, v)| 2.0 * g * v).collect());
            }
            Op::Sum(x) => {
                let n = self.value(*x).len();
                accumulate(&mut grads[x.0], vec![g[0]; n]);
            }
            Op::Custom { inputs, op } => {
                let vals: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                let gs = op.backward(&vals, &node.value, g);
                if gs.len() != inputs.len() {
                    return Err(Error::ShapeMismatch(format!("{} returned wrong gradient count", op.name())));
                }
                for (v, gv) in inputs.iter().zip(gs) {
                    if let (true, Some(gv)) = (self.needs(*v), gv) {
                        accumulate(&mut grads[v.0], gv);
                    }
                }
            }
        }
        Ok(())
    }

    /// Add the gradients of every parameter leaf into the store.
    pub fn accumulate_param_grads(&self, grads: &Gradients, store: &mut ParamStore) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                if let Some(g) = grads.grads.get(i).and_then(|g| g.as_ref()) {
                    for (a, b) in store.grad_mut(id).iter_mut().zip(g) {
                        *a += b;
                    }
                }
            }
        }
    }
}
