//! Peak minimization over the reserved tones.
//!
//! Solves `min_c max_k |(F^{-1}(x + c))_k|^2` with `c` supported on the
//! reserved tones. The objective is convex in `c`. The solver first descends
//! a log-sum-exp smoothing of the sample powers while the temperature is
//! annealed towards zero, then polishes on the exact max with steepest
//! descent steps over the near-active set (min-norm element of the convex
//! hull of active gradients).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::prt::PrtAllocation;
use crate::error::{Error, Result};
use crate::waveform::{FreqSymbols, OversampledIdft};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// Backtracking line search with sufficient-decrease constant `armijo`.
    Backtracking { initial: f64, shrink: f64, armijo: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Cap on smoothed-descent iterations (all temperature stages combined).
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Initial log-sum-exp temperature relative to the initial peak; 0
    /// skips the smoothed phase.
    pub smoothing: f64,
    /// Temperature multiplier between stages, in (0, 1).
    pub anneal: f64,
    /// Smoothed phase ends once the relative temperature drops below this.
    pub min_temperature: f64,
    pub polish_iters: usize,
    /// Relative improvement below which a stage (or polishing) stops.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 1500,
            step_rule: StepRule::Backtracking { initial: 1.0, shrink: 0.5, armijo: 1e-4 },
            smoothing: 0.05,
            anneal: 0.5,
            min_temperature: 2e-4,
            polish_iters: 300,
            tol: 1e-7,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let StepRule::Backtracking { initial, shrink, armijo } = self.step_rule;
        let ok = self.max_iters >= 1
            && self.tol > 0.0
            && self.smoothing >= 0.0
            && self.anneal > 0.0
            && self.anneal < 1.0
            && self.min_temperature > 0.0
            && initial > 0.0
            && shrink > 0.0
            && shrink < 1.0
            && armijo > 0.0
            && armijo < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid solver config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrSolution {
    /// Reduction signal, zero on data tones.
    pub c: FreqSymbols,
    /// `max_k |F^{-1}(x + c)|_k^2` in unitary sample units.
    pub peak: f64,
    pub initial_peak: f64,
    pub iterations: usize,
    /// `(iteration, exact peak)` after each accepted step.
    pub trace: Vec<(usize, f64)>,
}

/// The affine map `c_R -> z0 + G c_R` restricted to the reserved tones.
pub struct PeakProblem {
    m: usize,
    r: usize,
    z0: Vec<Complex64>,
    /// Column-major `M x R`.
    g: Vec<Complex64>,
}

impl PeakProblem {
    pub fn new(x: &FreqSymbols, alloc: &PrtAllocation, plan: &OversampledIdft) -> Self {
        let (n, m) = (plan.grid().n(), plan.grid().n_samples());
        let mut z0 = vec![Complex64::new(0.0, 0.0); m];
        plan.apply(&x.0, &mut z0);
        let r = alloc.reserved().len();
        let mut g = vec![Complex64::new(0.0, 0.0); m * r];
        let mut unit = vec![Complex64::new(0.0, 0.0); n];
        for (j, &pos) in alloc.reserved().iter().enumerate() {
            unit[pos] = Complex64::new(1.0, 0.0);
            plan.apply(&unit, &mut g[j * m..(j + 1) * m]);
            unit[pos] = Complex64::new(0.0, 0.0);
        }
        PeakProblem { m, r, z0, g }
    }

    pub fn n_samples(&self) -> usize {
        self.m
    }

    pub fn n_reserved(&self) -> usize {
        self.r
    }

    pub fn signal(&self, c: &[Complex64], z: &mut [Complex64]) {
        z.copy_from_slice(&self.z0);
        for (j, cj) in c.iter().enumerate() {
            if *cj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (zk, gk) in z.iter_mut().zip(&self.g[j * self.m..(j + 1) * self.m]) {
                *zk += gk * cj;
            }
        }
    }

    pub fn peak(&self, c: &[Complex64], z: &mut [Complex64]) -> f64 {
        self.signal(c, z);
        z.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max)
    }

    /// Gradient of `sum_k w_k |z_k|^2` w.r.t. `c` as `d/dRe + i d/dIm`.
    pub fn weighted_gradient(&self, z: &[Complex64], w: &[f64], out: &mut [Complex64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let col = &self.g[j * self.m..(j + 1) * self.m];
            let mut acc = Complex64::new(0.0, 0.0);
            for ((gk, zk), wk) in col.iter().zip(z).zip(w) {
                if *wk != 0.0 {
                    acc += gk.conj() * zk * *wk;
                }
            }
            *o = acc * 2.0;
        }
    }

    /// Gradient of `|z_k|^2` alone.
    pub fn sample_gradient(&self, z: &[Complex64], k: usize, out: &mut [Complex64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.g[j * self.m + k].conj() * z[k] * 2.0;
        }
    }
}

fn smoothed_max(z: &[Complex64], temp: f64, weights: &mut [f64]) -> f64 {
    let pmax = z.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let mut sum = 0.0;
    for (w, v) in weights.iter_mut().zip(z) {
        *w = ((v.norm_sqr() - pmax) / temp).exp();
        sum += *w;
    }
    for w in weights.iter_mut() {
        *w /= sum;
    }
    pmax + temp * sum.ln()
}

fn smoothed_value(z: &[Complex64], temp: f64) -> f64 {
    let pmax = z.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let sum: f64 = z.iter().map(|v| ((v.norm_sqr() - pmax) / temp).exp()).sum();
    pmax + temp * sum.ln()
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// Min-norm point of the convex hull of `vectors` (Frank-Wolfe with exact
/// line search); returns the combination weights.
fn min_norm_combination(vectors: &[Vec<Complex64>], iters: usize) -> Vec<f64> {
    let a = vectors.len();
    let mut q = vec![0.0; a * a];
    for i in 0..a {
        for j in i..a {
            let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(u, v)| (u.conj() * v).re).sum();
            q[i * a + j] = dot;
            q[j * a + i] = dot;
        }
    }
    let mut alpha = vec![1.0 / a as f64; a];
    let mut qa: Vec<f64> = (0..a).map(|i| (0..a).map(|j| q[i * a + j] * alpha[j]).sum()).collect();
    for _ in 0..iters {
        let (s, _) = qa.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        let aqa: f64 = alpha.iter().zip(&qa).map(|(x, y)| x * y).sum();
        // Direction e_s - alpha: step gamma minimizes |(1-g) p + g v_s|^2.
        let num = aqa - qa[s];
        let den = aqa - 2.0 * qa[s] + q[s * a + s];
        if num <= 1e-15 * aqa.max(1e-300) || den <= 0.0 {
            break;
        }
        let gamma = (num / den).min(1.0);
        for (i, al) in alpha.iter_mut().enumerate() {
            *al *= 1.0 - gamma;
            if i == s {
                *al += gamma;
            }
        }
        for (i, v) in qa.iter_mut().enumerate() {
            *v = (1.0 - gamma) * *v + gamma * q[i * a + s];
        }
    }
    alpha
}

pub fn tr_minimize_peak(
    x: &FreqSymbols,
    alloc: &PrtAllocation,
    plan: &OversampledIdft,
    cfg: &SolverConfig,
) -> Result<TrSolution> {
    cfg.validate()?;
    x.check(plan.grid())?;
    if alloc.n() != plan.grid().n() {
        return Err(Error::LengthMismatch { expected: plan.grid().n(), got: alloc.n() });
    }
    let problem = PeakProblem::new(x, alloc, plan);
    let r = problem.n_reserved();
    let m = problem.n_samples();
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    let mut c = vec![Complex64::new(0.0, 0.0); r];
    let initial_peak = problem.peak(&c, &mut z);
    let mut solution = TrSolution {
        c: FreqSymbols::zeros(alloc.n()),
        peak: initial_peak,
        initial_peak,
        iterations: 0,
        trace: Vec::new(),
    };
    if r == 0 || initial_peak == 0.0 {
        return Ok(solution);
    }

    let StepRule::Backtracking { initial, shrink, armijo } = cfg.step_rule;
    let mut weights = vec![0.0; m];
    let mut grad = vec![Complex64::new(0.0, 0.0); r];
    let mut trial = vec![Complex64::new(0.0, 0.0); r];
    let mut z_trial = vec![Complex64::new(0.0, 0.0); m];
    let mut best_peak = initial_peak;
    let mut best_c = c.clone();
    let mut iters = 0;
    // Sample-power scale: peak powers are O(initial_peak), so steps scale
    // inversely with it.
    let mut step = initial / initial_peak;

    let mut temp = cfg.smoothing * initial_peak;
    while cfg.smoothing > 0.0 && temp >= cfg.min_temperature * initial_peak && iters < cfg.max_iters {
        problem.signal(&c, &mut z);
        let mut f = smoothed_max(&z, temp, &mut weights);
        while iters < cfg.max_iters {
            problem.weighted_gradient(&z, &weights, &mut grad);
            let gn = norm_sqr(&grad);
            if gn == 0.0 {
                break;
            }
            let mut accepted = None;
            for _ in 0..60 {
                for ((t, ci), gi) in trial.iter_mut().zip(&c).zip(&grad) {
                    *t = ci - gi * step;
                }
                problem.signal(&trial, &mut z_trial);
                let f_new = smoothed_value(&z_trial, temp);
                if f_new <= f - armijo * step * gn {
                    accepted = Some(f_new);
                    break;
                }
                step *= shrink;
            }
            let Some(f_new) = accepted else { break };
            iters += 1;
            std::mem::swap(&mut c, &mut trial);
            std::mem::swap(&mut z, &mut z_trial);
            let peak = z.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
            if peak < best_peak {
                best_peak = peak;
                best_c.copy_from_slice(&c);
            }
            solution.trace.push((iters, peak));
            let rel = (f - f_new) / f.abs().max(1e-300);
            f = smoothed_max(&z, temp, &mut weights);
            step /= shrink;
            if rel < cfg.tol {
                break;
            }
        }
        temp *= cfg.anneal;
    }

    // Exact-max polishing from the best smoothed iterate.
    c.copy_from_slice(&best_c);
    let mut h = problem.peak(&c, &mut z);
    let mut band = 1e-2;
    let mut polish_step = step;
    let mut sample_grads: Vec<Vec<Complex64>> = Vec::new();
    let mut direction = vec![Complex64::new(0.0, 0.0); r];
    for _ in 0..cfg.polish_iters {
        let mut active: Vec<(usize, f64)> = z
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.norm_sqr()))
            .filter(|&(_, p)| p >= h * (1.0 - band))
            .collect();
        active.sort_by(|a, b| b.1.total_cmp(&a.1));
        active.truncate(4 * r + 4);
        sample_grads.clear();
        for &(k, _) in &active {
            let mut gk = vec![Complex64::new(0.0, 0.0); r];
            problem.sample_gradient(&z, k, &mut gk);
            sample_grads.push(gk);
        }
        let alpha = min_norm_combination(&sample_grads, 400);
        direction.fill(Complex64::new(0.0, 0.0));
        for (al, gk) in alpha.iter().zip(&sample_grads) {
            for (d, g) in direction.iter_mut().zip(gk) {
                *d -= g * *al;
            }
        }
        let dn = norm_sqr(&direction);
        let mut improved = None;
        if dn > 0.0 {
            let mut s = polish_step;
            for _ in 0..50 {
                for ((t, ci), di) in trial.iter_mut().zip(&c).zip(&direction) {
                    *t = ci + di * s;
                }
                let h_new = problem.peak(&trial, &mut z_trial);
                if h_new < h - armijo * s * dn {
                    improved = Some(h_new);
                    polish_step = s / shrink;
                    break;
                }
                s *= shrink;
            }
        }
        match improved {
            Some(h_new) => {
                iters += 1;
                std::mem::swap(&mut c, &mut trial);
                std::mem::swap(&mut z, &mut z_trial);
                let rel = (h - h_new) / h;
                h = h_new;
                solution.trace.push((iters, h));
                if rel < cfg.tol {
                    band *= 0.25;
                }
            }
            None => band *= 0.25,
        }
        if band < 1e-10 {
            break;
        }
    }
    if h < best_peak {
        best_peak = h;
        best_c.copy_from_slice(&c);
    }

    for (&pos, cj) in alloc.reserved().iter().zip(&best_c) {
        solution.c.0[pos] = *cj;
    }
    solution.peak = best_peak;
    solution.iterations = iters;
    Ok(solution)
}

/// Solver trace as `iteration,peak` CSV.
pub fn trace_csv(trace: &[(usize, f64)]) -> String {
    let mut out = String::from("iteration,peak\n");
    for (i, p) in trace {
        out.push_str(&format!("{i},{p:e}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baseline::{qam16_map, sample_prt, QamConstellation};
    use crate::bits::BitGrid;
    use crate::waveform::build_grid;
    use rand::{Rng, SeedableRng};

    fn qam_symbol(alloc: &PrtAllocation, rng: &mut impl Rng) -> FreqSymbols {
        let bits = BitGrid::random(alloc.data().len(), 4, rng);
        qam16_map(&bits, alloc, &QamConstellation::qam16()).unwrap()
    }

    #[test]
    fn no_reserved_tones_is_identity() {
        let grid = build_grid(15, 4).unwrap();
        let plan = OversampledIdft::new(grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let alloc = PrtAllocation::none(&grid);
        let x = qam_symbol(&alloc, &mut rng);
        let sol = tr_minimize_peak(&x, &alloc, &plan, &SolverConfig::default()).unwrap();
        assert_eq!(sol.c.energy(), 0.0);
        assert_eq!(sol.peak, sol.initial_peak);
    }

    #[test]
    fn zero_input_stays_zero() {
        let grid = build_grid(15, 4).unwrap();
        let plan = OversampledIdft::new(grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let alloc = sample_prt(&grid, 4, &mut rng).unwrap();
        let sol = tr_minimize_peak(&FreqSymbols::zeros(15), &alloc, &plan, &SolverConfig::default()).unwrap();
        assert_eq!(sol.peak, 0.0);
        assert_eq!(sol.c.energy(), 0.0);
    }

    #[test]
    fn never_increases_peak_and_stays_on_reserved_tones() {
        let grid = build_grid(25, 4).unwrap();
        let plan = OversampledIdft::new(grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let alloc = sample_prt(&grid, 5, &mut rng).unwrap();
            let x = qam_symbol(&alloc, &mut rng);
            let sol = tr_minimize_peak(&x, &alloc, &plan, &SolverConfig::default()).unwrap();
            assert!(sol.peak <= sol.initial_peak);
            assert!(sol.peak < sol.initial_peak * 0.95);
            for &p in alloc.data() {
                assert_eq!(sol.c.0[p], Complex64::new(0.0, 0.0));
            }
            let z = plan.to_time(&(&x + &sol.c)).unwrap();
            assert!((z.peak_power() - sol.peak).abs() <= 1e-12 * sol.peak);
        }
    }

    #[test]
    fn objective_is_midpoint_convex() {
        let grid = build_grid(25, 4).unwrap();
        let plan = OversampledIdft::new(grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let alloc = sample_prt(&grid, 6, &mut rng).unwrap();
        let x = qam_symbol(&alloc, &mut rng);
        let problem = PeakProblem::new(&x, &alloc, &plan);
        let mut z = vec![Complex64::new(0.0, 0.0); problem.n_samples()];
        for _ in 0..200 {
            let c1: Vec<Complex64> = (0..6).map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let c2: Vec<Complex64> = (0..6).map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let mid: Vec<Complex64> = c1.iter().zip(&c2).map(|(a, b)| (a + b) * 0.5).collect();
            let (h1, h2, hm) = (problem.peak(&c1, &mut z), problem.peak(&c2, &mut z), problem.peak(&mid, &mut z));
            assert!(hm <= 0.5 * (h1 + h2) + 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let grid = build_grid(9, 3).unwrap();
        let plan = OversampledIdft::new(grid);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let alloc = sample_prt(&grid, 3, &mut rng).unwrap();
        let x = qam_symbol(&alloc, &mut rng);
        let problem = PeakProblem::new(&x, &alloc, &plan);
        let m = problem.n_samples();
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let c: Vec<Complex64> = (0..3).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let mut z = vec![Complex64::new(0.0, 0.0); m];
        let f = |c: &[Complex64], z: &mut [Complex64]| {
            problem.signal(c, z);
            z.iter().zip(&w).map(|(v, w)| v.norm_sqr() * w).sum::<f64>()
        };
        problem.signal(&c, &mut z);
        let mut g = vec![Complex64::new(0.0, 0.0); 3];
        problem.weighted_gradient(&z, &w, &mut g);
        let h = 1e-6;
        for j in 0..3 {
            for (dir, analytic) in [(Complex64::new(h, 0.0), g[j].re), (Complex64::new(0.0, h), g[j].im)] {
                let mut cp = c.clone();
                cp[j] += dir;
                let mut cm = c.clone();
                cm[j] -= dir;
                let fd = (f(&cp, &mut z) - f(&cm, &mut z)) / (2.0 * h);
                assert!((fd - analytic).abs() < 1e-6 * analytic.abs().max(1.0));
            }
        }
    }
}
