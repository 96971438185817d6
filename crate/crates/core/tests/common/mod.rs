#![allow(dead_code)]

use learnwave_core::nn::{Graph, ParamStore, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

pub const H: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha12Rng, shape: Vec<usize>) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape, (0..len).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Largest relative error between reverse-mode and central-difference
/// derivatives of a scalar graph with respect to its inputs, over `probes`
/// random coordinates.
pub fn input_grad_error<F>(inputs: &[Tensor], probes: usize, seed: u64, f: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.input_with_grad(t.clone())).collect();
    let loss = f(&mut g, &vars);
    let grads = g.backward(loss).unwrap();
    let eval = |ts: &[Tensor]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.input(t.clone())).collect();
        let l = f(&mut g, &vars);
        g.value(l).item()
    };
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let which = r.random_range(0..inputs.len());
        let idx = r.random_range(0..inputs[which].len());
        let mut plus = inputs.to_vec();
        plus[which].data_mut()[idx] += H;
        let mut minus = inputs.to_vec();
        minus[which].data_mut()[idx] -= H;
        let numeric = (eval(&plus) - eval(&minus)) / (2.0 * H);
        let analytic = grads.get(vars[which]).map_or(0.0, |g| g[idx]);
        worst = worst.max(rel_err(analytic, numeric));
    }
    worst
}

/// Same check against the trainable entries of a parameter store.
pub fn param_grad_error<F>(store: &ParamStore, probes: usize, seed: u64, f: F) -> f64
where
    F: Fn(&mut Graph, &mut ParamStore) -> Var,
{
    let mut s = store.clone();
    s.zero_grads();
    let mut g = Graph::new();
    let loss = f(&mut g, &mut s);
    let grads = g.backward(loss).unwrap();
    g.accumulate_param_grads(&grads, &mut s);
    let eval = |st: &ParamStore| {
        let mut st = st.clone();
        let mut g = Graph::new();
        let l = f(&mut g, &mut st);
        g.value(l).item()
    };
    let trainable: Vec<_> = store.ids().filter(|&id| store.entry(id).trainable).collect();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let id = trainable[r.random_range(0..trainable.len())];
        let idx = r.random_range(0..store.get(id).len());
        let mut plus = store.clone();
        plus.get_mut(id).data_mut()[idx] += H;
        let mut minus = store.clone();
        minus.get_mut(id).data_mut()[idx] -= H;
        let numeric = (eval(&plus) - eval(&minus)) / (2.0 * H);
        worst = worst.max(rel_err(s.grad(id)[idx], numeric));
    }
    worst
}

/// `sum((x + c)^2)`: a generic scalar read-out with non-trivial upstream gradient.
pub fn readout(g: &mut Graph, x: Var, c: &Tensor) -> Var {
    let y = g.add_const(x, c).unwrap();
    let y = g.square(y);
    g.sum(y)
}
