//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! `cargo test -p learnwave-core --test acceptance -- 1 4 7` runs a subset.
//! Criteria 8 and 9 train real models and take most of the wall time.

#[path = "common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use common::{input_grad_error, param_grad_error, randn, readout, rng};
use learnwave_core::baseline::{baseline_rate_with, sample_prt, tr_minimize_peak, BaselineConfig, QamConstellation, SolverConfig};
use learnwave_core::bits::BitGrid;
use learnwave_core::e2e::ops::{aclr_ratio, bce_logits, idft, papr_hinge};
use learnwave_core::e2e::{augmented_lagrangian, ArchConfig, ConstraintState, LossContext, Transceiver};
use learnwave_core::experiment::{point_dir, run_baseline_sweep, run_e2e_point, ExperimentConfig};
use learnwave_core::nn::{Mode, NormStats, ParamStore, ResBlock};
use learnwave_core::rng::stream;
use learnwave_core::units::linear_to_db;
use learnwave_core::waveform::{build_grid, compute_gram, FreqSymbols, OversampledIdft, PaprAccumulator, QuadratureConfig};
use num_complex::Complex64;
use rand::Rng;

// tolerances
const GRAM_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-6;
const FD_TOL: f64 = 1e-4;
const FD_PIPELINE_TOL: f64 = 1e-3;
const PAPR_BAND_DB: (f64, f64) = (10.5, 11.5);
const PAPR_ORACLE_DB: f64 = 0.1;
const TR_GAIN_DB: f64 = 1.5;
const TR_ORACLE_REL: f64 = 0.02;
const RATE_BAND: (f64, f64) = (3.2, 3.4);
const RATE_ORACLE_TOL: f64 = 0.01;
const E2E_PAPR_DB: f64 = 1.0;
const E2E_ACLR_MARGIN_DB: f64 = 1.0;
const E2E_RATE_FLOOR: f64 = 2.5;

struct Harness {
    selected: Vec<u32>,
    failed: Vec<String>,
}

impl Harness {
    fn wants(&self, id: u32) -> bool {
        self.selected.is_empty() || self.selected.contains(&id)
    }

    fn check(&mut self, id: &str, pass: bool, what: &str) {
        println!("[{}] {id}: {what}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn out_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn random_qam(n: usize, points: &[Complex64], r: &mut impl Rng) -> Vec<Complex64> {
    (0..n).map(|_| points[r.random_range(0..points.len())]).collect()
}

fn gram_identity(h: &mut Harness) {
    let mut worst: f64 = 0.0;
    for n in [3, 15, 75] {
        let gram = compute_gram(&build_grid(n, 4).unwrap(), &QuadratureConfig::default()).unwrap();
        for a in 0..n {
            for b in 0..n {
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((gram.w()[a * n + b] - want).abs());
            }
        }
    }
    h.check("1a", worst <= GRAM_TOL, &format!("W = I for N in {{3,15,75}}, max |W - I| = {worst:.2e} (tol {GRAM_TOL:.0e})"));

    let grid = build_grid(75, 5).unwrap();
    let gram = compute_gram(&grid, &QuadratureConfig::default()).unwrap();
    let mut r = stream(101, "acceptance-energy");
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = FreqSymbols((0..75).map(|_| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)).collect());
        let norm: f64 = x.0.iter().map(|c| c.norm_sqr()).sum();
        worst = worst.max((gram.total_energy(&x) - norm).abs() / norm);
    }
    h.check("1b", worst <= GRAM_TOL, &format!("e_total = |x|^2 on 1000 random x, max rel err {worst:.2e}"));
}

fn quadrature(h: &mut Harness) {
    let grid = build_grid(3, 4).unwrap();
    let gram = compute_gram(&grid, &QuadratureConfig::default()).unwrap();
    let centre = grid.position_of(0).unwrap();
    let got = gram.v_entry(centre, centre);
    // composite midpoint rule, 10^6 nodes on [-1.5, 1.5]
    let nodes = 1_000_000;
    let step = 3.0 / nodes as f64;
    let oracle: f64 = (0..nodes)
        .map(|i| {
            let u = -1.5 + (i as f64 + 0.5) * step;
            let s = if u == 0.0 { 1.0 } else { (PI * u).sin() / (PI * u) };
            s * s * step
        })
        .sum();
    let err = (got - oracle).abs();
    h.check("2", err <= QUAD_TOL, &format!("v_00 (N=3) = {got:.9}, brute-force oracle {oracle:.9}, |diff| = {err:.1e} (tol {QUAD_TOL:.0e})"));
}

fn gradients(h: &mut Harness) {
    let mut r = rng(300);
    let mut worst: Vec<(&str, f64)> = Vec::new();

    let mut sep: f64 = 0.0;
    for (k, d) in [(1, 1), (3, 1), (9, 2), (15, 4)] {
        let inputs = vec![randn(&mut r, vec![2, 13, 3]), randn(&mut r, vec![3, k]), randn(&mut r, vec![4, 3]), randn(&mut r, vec![4])];
        let c = randn(&mut r, vec![2, 13, 4]);
        sep = sep.max(input_grad_error(&inputs, 12, k as u64, |g, v| {
            let y = g.sepconv(v[0], v[1], v[2], v[3], d).unwrap();
            readout(g, y, &c)
        }));
    }
    worst.push(("separable conv", sep));

    let inputs = vec![randn(&mut r, vec![4, 6, 3]), randn(&mut r, vec![3]), randn(&mut r, vec![3])];
    let c = randn(&mut r, vec![4, 6, 3]);
    let mut bn: f64 = 0.0;
    for stats in [NormStats::Batch { eps: 1e-3 }, NormStats::Fixed { mean: vec![0.1, -0.3, 0.0], var: vec![1.5, 0.2, 0.9], eps: 1e-3 }] {
        bn = bn.max(input_grad_error(&inputs, 12, 2, |g, v| {
            let (y, _, _) = g.batchnorm(v[0], v[1], v[2], &stats).unwrap();
            readout(g, y, &c)
        }));
    }
    worst.push(("batch norm", bn));

    let inputs = vec![randn(&mut r, vec![5, 4]), randn(&mut r, vec![5, 4])];
    let c = randn(&mut r, vec![5, 4]);
    worst.push((
        "relu/add/scale",
        input_grad_error(&inputs, 12, 3, |g, v| {
            let a = g.relu(v[0]);
            let b = g.scale(v[1], -1.7);
            let s = g.add(a, b).unwrap();
            readout(g, s, &c)
        }),
    ));

    let mut store = ParamStore::new();
    let blocks: Vec<_> = [(3, 1), (9, 2)]
        .iter()
        .enumerate()
        .map(|(i, &(k, d))| ResBlock::new(&mut store, &format!("b{i}"), 3, k, d, &mut r).unwrap())
        .collect();
    let x = randn(&mut r, vec![3, 12, 3]);
    let c = randn(&mut r, vec![3, 12, 3]);
    worst.push((
        "residual blocks",
        param_grad_error(&store, 15, 4, |g, s| {
            let mut y = g.input(x.clone());
            for b in &blocks {
                y = b.forward(g, s, y, Mode::Train).unwrap();
            }
            readout(g, y, &c)
        }),
    ));

    let grid = build_grid(7, 4).unwrap();
    let plan = Arc::new(OversampledIdft::new(grid));
    let gram = Arc::new(compute_gram(&grid, &QuadratureConfig::default()).unwrap());
    let x = randn(&mut r, vec![4, 7, 2]);
    worst.push((
        "PAPR hinge",
        input_grad_error(std::slice::from_ref(&x), 15, 5, |g, v| {
            let z = idft(g, &plan, v[0]).unwrap();
            papr_hinge(g, z, 1.8).unwrap()
        }),
    ));
    worst.push(("ACLR ratio", input_grad_error(&[x], 15, 6, |g, v| aclr_ratio(g, &gram, v[0], 0.01).unwrap())));
    let l = randn(&mut r, vec![2, 3, 4]);
    let bits: Vec<u8> = (0..24).map(|_| r.random_range(0..2)).collect();
    worst.push(("BCE", input_grad_error(&[l], 15, 7, |g, v| bce_logits(g, v[0], &bits).unwrap())));

    let layer_worst = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    h.check("3a", layer_worst < FD_TOL, &format!("layer/loss finite differences < {FD_TOL:.0e}: {}", detail.join(", ")));

    let grid = build_grid(5, 4).unwrap();
    let ctx = LossContext {
        plan: Arc::new(OversampledIdft::new(grid)),
        gram: Arc::new(compute_gram(&grid, &QuadratureConfig::default()).unwrap()),
        gamma_peak: 1.5,
        beta_leak: 0.01,
    };
    let arch = ArchConfig { filters: 4, blocks: vec![(3, 1), (3, 2)] };
    let model = Transceiver::new(grid, 2, &arch, 9).unwrap();
    let bits = BitGrid::random(4 * 5, 2, &mut r);
    let mut noise = randn(&mut r, vec![4, 5, 2]);
    noise.data_mut().iter_mut().for_each(|v| *v *= 0.3);
    let state = ConstraintState { lambda_p: 0.7, lambda_l: 0.2, mu_p: 0.5, mu_l: 0.3, ..ConstraintState::default() };
    let err = param_grad_error(&model.store, 30, 8, |g, store| {
        let mut m = Transceiver::from_store(grid, 2, &arch, store).unwrap();
        m.lagrangian(g, &ctx, &bits, &noise, &state, Mode::Train).unwrap().1
    });
    h.check("3b", err < FD_PIPELINE_TOL, &format!("augmented Lagrangian, tiny transceiver, max rel err {err:.1e} (tol {FD_PIPELINE_TOL:.0e})"));
}

fn plain_ofdm_papr(h: &mut Harness) {
    let grid = build_grid(75, 5).unwrap();
    let m = grid.n_samples();
    let eps = 1e-3;
    let points = QamConstellation::qam16().points;
    let plan = OversampledIdft::new(grid);

    let symbols = 1_000_000;
    let mut acc = PaprAccumulator::new(eps, symbols * m).unwrap();
    let mut r = stream(4, "c4-fft");
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..symbols {
        plan.apply(&random_qam(75, &points, &mut r), &mut z);
        for v in &z {
            acc.push(v.norm_sqr());
        }
    }
    let est = acc.finish().unwrap();

    // oracle: explicit exponential sums by Horner's rule, separate stream, plain selection
    let oracle_symbols = 100_000;
    let mut r = stream(44, "c4-oracle");
    let ws: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * (-0.5 + (k as f64 + 0.5) / m as f64)))
        .collect();
    let mut powers: Vec<f32> = Vec::with_capacity(oracle_symbols * m);
    let mut sum = 0.0;
    for _ in 0..oracle_symbols {
        let x = random_qam(75, &points, &mut r);
        for w in &ws {
            // sum_p x_p w^(p - (N-1)/2); the common factor has unit modulus
            let mut poly = Complex64::new(0.0, 0.0);
            for xp in x.iter().rev() {
                poly = poly * w + xp;
            }
            let p = poly.norm_sqr() / m as f64;
            sum += p;
            powers.push(p as f32);
        }
    }
    let total = powers.len();
    let idx = total - 1 - (eps * total as f64).floor() as usize;
    let (_, q, _) = powers.select_nth_unstable_by(idx, f32::total_cmp);
    let oracle_db = linear_to_db(*q as f64 / (sum / total as f64));

    h.check(
        "4a",
        est.db >= PAPR_BAND_DB.0 && est.db <= PAPR_BAND_DB.1,
        &format!("plain 16-QAM OFDM PAPR_1e-3 = {:.3} dB over {symbols} symbols, band [{}, {}] dB", est.db, PAPR_BAND_DB.0, PAPR_BAND_DB.1),
    );
    let diff = (est.db - oracle_db).abs();
    h.check("4b", diff <= PAPR_ORACLE_DB, &format!("matches exponential-sum oracle {oracle_db:.3} dB ({oracle_symbols} symbols), |diff| = {diff:.3} dB (tol {PAPR_ORACLE_DB})"));
}

/// Long-run subgradient descent on `max_k |z0_k + (G c)_k|^2` with an
/// explicit dense `G`; returns the best peak seen.
fn subgradient_oracle(z0: &[Complex64], g: &[Vec<Complex64>], iters: usize) -> f64 {
    let m = z0.len();
    let r = g.len();
    let mut c = vec![Complex64::new(0.0, 0.0); r];
    let mut z = z0.to_vec();
    let peak_of = |z: &[Complex64]| z.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let mut best = peak_of(&z);
    let scale = (best * m as f64).sqrt();
    for i in 0..iters {
        let (k, _) = z.iter().enumerate().fold((0, -1.0), |acc, (k, v)| if v.norm_sqr() > acc.1 { (k, v.norm_sqr()) } else { acc });
        let grad: Vec<Complex64> = g.iter().map(|col| col[k].conj() * z[k]).collect();
        let norm = grad.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let step = 0.3 * scale / ((i + 1) as f64).sqrt() / norm;
        for (j, gj) in grad.iter().enumerate() {
            let d = -gj * step;
            c[j] += d;
            for (zk, gk) in z.iter_mut().zip(&g[j]) {
                *zk += gk * d;
            }
        }
        best = best.min(peak_of(&z));
    }
    best
}

fn tone_reservation(h: &mut Harness) {
    let grid = build_grid(75, 5).unwrap();
    let gram = compute_gram(&grid, &QuadratureConfig::default()).unwrap();
    let base = |reserved| BaselineConfig {
        grid,
        reserved,
        snr_db: 10.0,
        n_symbols: 2000,
        epsilon: 1e-3,
        solver: SolverConfig::default(),
        quadrature: QuadratureConfig::default(),
        seed: 5,
    };
    let r0 = baseline_rate_with(&base(0), &gram).unwrap().metrics.papr.db;
    let r16 = baseline_rate_with(&base(16), &gram).unwrap().metrics.papr.db;
    h.check(
        "5a",
        r0 - r16 >= TR_GAIN_DB,
        &format!("R=16 lowers PAPR_1e-3 from {r0:.2} to {r16:.2} dB (gain {:.2} dB, need >= {TR_GAIN_DB})", r0 - r16),
    );

    let plan = OversampledIdft::new(grid);
    let m = grid.n_samples();
    let times: Vec<f64> = (0..m).map(|k| -0.5 + (k as f64 + 0.5) / m as f64).collect();
    let points = QamConstellation::qam16().points;
    let mut r = stream(55, "c5-oracle");
    let mut worst: f64 = 0.0;
    let mut worse_than_oracle: f64 = 0.0;
    for _ in 0..100 {
        let alloc = sample_prt(&grid, 16, &mut r).unwrap();
        let mut x = FreqSymbols::zeros(75);
        for &p in alloc.data() {
            x.0[p] = points[r.random_range(0..16)];
        }
        let sol = tr_minimize_peak(&x, &alloc, &plan, &SolverConfig::default()).unwrap();
        let column = |index: i64| -> Vec<Complex64> {
            times.iter().map(|t| Complex64::from_polar(1.0 / (m as f64).sqrt(), 2.0 * PI * index as f64 * t)).collect()
        };
        let mut z0 = vec![Complex64::new(0.0, 0.0); m];
        for (p, xp) in x.0.iter().enumerate() {
            if xp.norm_sqr() > 0.0 {
                for (zk, e) in z0.iter_mut().zip(column(grid.index_at(p))) {
                    *zk += xp * e;
                }
            }
        }
        let g: Vec<Vec<Complex64>> = alloc.reserved().iter().map(|&p| column(grid.index_at(p))).collect();
        let oracle = subgradient_oracle(&z0, &g, 20_000);
        let rel = sol.peak / oracle - 1.0;
        worst = worst.max(rel.abs());
        worse_than_oracle = worse_than_oracle.max(rel);
    }
    h.check(
        "5b",
        worst <= TR_ORACLE_REL,
        &format!("solver peak vs 20000-step subgradient oracle on 100 instances: max |rel diff| {:.2}% (solver worse by at most {:.2}%; tol {}%)", 100.0 * worst, 100.0 * worse_than_oracle.max(0.0), 100.0 * TR_ORACLE_REL),
    );
}

/// Gauss-Hermite nodes/weights for weight `exp(-x^2)`.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z: f64 = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (PI.powf(-0.25), 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// BICM rate `K - BCE` of the exact demapper by 2-D Gauss-Hermite quadrature.
fn bmd_rate_oracle(points: &[Complex64], snr_db: f64, order: usize) -> f64 {
    let s2 = 10f64.powf(-snr_db / 10.0);
    let (gx, gw) = gauss_hermite(order);
    let bit = |label: usize, k: usize| (label >> (3 - k)) & 1;
    let mut bce = 0.0;
    for (label, c) in points.iter().enumerate() {
        for (xi, wi) in gx.iter().zip(&gw) {
            for (xj, wj) in gx.iter().zip(&gw) {
                let y = c + Complex64::new(s2.sqrt() * xi, s2.sqrt() * xj);
                let metric: Vec<f64> = points.iter().map(|p| -(y - p).norm_sqr() / s2).collect();
                let all = log_sum_exp(metric.iter().copied());
                for k in 0..4 {
                    let same = log_sum_exp(metric.iter().enumerate().filter(|(l, _)| bit(*l, k) == bit(label, k)).map(|(_, m)| *m));
                    bce += wi * wj / PI * (all - same) / std::f64::consts::LN_2;
                }
            }
        }
    }
    4.0 - bce / points.len() as f64
}

fn baseline_rate_check(h: &mut Harness) {
    let grid = build_grid(75, 5).unwrap();
    let gram = compute_gram(&grid, &QuadratureConfig::default()).unwrap();
    let n_symbols = 1_000_000usize.div_ceil(75);
    let cfg = BaselineConfig {
        grid,
        reserved: 0,
        snr_db: 10.0,
        n_symbols,
        epsilon: 1e-3,
        solver: SolverConfig::default(),
        quadrature: QuadratureConfig::default(),
        seed: 6,
    };
    let rate = baseline_rate_with(&cfg, &gram).unwrap().metrics.rate;
    h.check(
        "6a",
        rate >= RATE_BAND.0 && rate <= RATE_BAND.1,
        &format!("BMD rate at 10 dB, R=0, {} QAM symbols: {rate:.4} bits/cu, band [{}, {}]", n_symbols * 75, RATE_BAND.0, RATE_BAND.1),
    );
    let oracle = bmd_rate_oracle(&QamConstellation::qam16().points, 10.0, 80);
    let diff = (rate - oracle).abs();
    h.check("6b", diff <= RATE_ORACLE_TOL, &format!("matches 80x80 Gauss-Hermite rate oracle {oracle:.4}, |diff| = {diff:.4} (tol {RATE_ORACLE_TOL})"));
}

fn multiplier_arithmetic(h: &mut Harness) {
    let mut s = ConstraintState::default();
    let inputs = [(0.5, 2.0), (0.25, -10.0), (0.0, 5.0)];
    // worked by hand from lambda = 0, mu_p = 0.1, mu_l = 0.001, tau = 0.004
    let want = [
        (0.05, 0.002, 0.1004, 0.001004),
        (0.0751, 0.0, 0.1008016, 0.001008016),
        (0.0751, 0.00504008, 0.1012048064, 0.001012048064),
    ];
    let mut worst: f64 = 0.0;
    for ((lp, ll), (a, b, c, d)) in inputs.iter().zip(want) {
        s.update(*lp, *ll);
        for (got, want) in [(s.lambda_p, a), (s.lambda_l, b), (s.mu_p, c), (s.mu_l, d)] {
            let err = if want == 0.0 { got.abs() } else { ((got - want) / want).abs() };
            worst = worst.max(err);
        }
    }
    // L = 1 + 0.0751*0.2 + 0.5*0.1012048064*0.04 + ((0.00504008 - 0.001012048064*0.1)^2 - 0.00504008^2)/(2*0.001012048064)
    let lag = augmented_lagrangian(1.0, 0.2, -0.1, &s).unwrap();
    let want_lag = 1.0 + 0.01502 + 0.002024096128 + ((0.0049388751936f64).powi(2) - 0.00504008f64.powi(2)) / 0.002024096128;
    worst = worst.max(((lag - want_lag) / want_lag).abs());
    h.check("7", worst <= 1e-14 && s.iteration == 3, &format!("three multiplier/penalty updates and L reproduce hand values, max rel err {worst:.1e}"));
}

fn desk_training(h: &mut Harness) {
    let cfg = ExperimentConfig::profile("desk").unwrap();
    let gram = Arc::new(compute_gram(&cfg.grid, &cfg.quadrature).unwrap());
    let out = out_dir("desk");
    let t = Instant::now();
    let rec = run_e2e_point(&cfg, &gram, &out, 6.0, -20.0, &mut |line| eprintln!("  {line}")).unwrap();
    let minutes = t.elapsed().as_secs_f64() / 60.0;
    h.check(
        "8a",
        (rec.papr_db - 6.0).abs() <= E2E_PAPR_DB,
        &format!("desk run (6 dB, -20 dB): PAPR_1e-3 = {:.2} dB, target 6 +- {E2E_PAPR_DB} dB ({minutes:.0} min)", rec.papr_db),
    );
    h.check("8b", rec.aclr_db <= -20.0 + E2E_ACLR_MARGIN_DB, &format!("ACLR = {:.2} dB <= {} dB", rec.aclr_db, -20.0 + E2E_ACLR_MARGIN_DB));
    h.check("8c", rec.rate >= E2E_RATE_FLOOR, &format!("rate K - BCE = {:.3} >= {E2E_RATE_FLOOR}", rec.rate));
}

fn gamma_sweep(h: &mut Harness) {
    let mut cfg = ExperimentConfig::profile("desk").unwrap();
    cfg.e2e.outer_iterations = 150;
    cfg.e2e.batch_size = 128;
    cfg.e2e.probe_batch_size = 128;
    let gram = Arc::new(compute_gram(&cfg.grid, &cfg.quadrature).unwrap());
    let out = out_dir("sweep");
    let gammas = [4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
    let mut measured = Vec::new();
    for &g in &gammas {
        let rec = run_e2e_point(&cfg, &gram, &out, g, -20.0, &mut |line| {
            if !line.contains(" u=") {
                eprintln!("  {line}")
            }
        })
        .unwrap();
        measured.push(rec.papr_db);
    }
    let listing: Vec<String> = gammas.iter().zip(&measured).map(|(g, p)| format!("{g}->{p:.2}")).collect();
    let monotone = measured.windows(2).all(|w| w[1] >= w[0]);
    h.check("9a", monotone, &format!("PAPR non-decreasing in gamma_peak (beta -20 dB, 150 outer iterations, B=128): {}", listing.join(", ")));
    let worst = gammas.iter().zip(&measured).map(|(g, p)| (p - g).abs()).fold(0.0, f64::max);
    h.check("9b", worst <= E2E_PAPR_DB, &format!("tracks targets, max |PAPR - gamma| = {worst:.2} dB (tol {E2E_PAPR_DB})"));
}

fn reproducibility(h: &mut Harness) {
    let toml = r#"
        [grid]
        n_subcarriers = 15
        oversampling = 4
        [baseline]
        reserved = [0, 4]
        n_symbols = 200
        [e2e]
        outer_iterations = 4
        inner_steps = 3
        batch_size = 32
        probe_batch_size = 32
        checkpoint_every = 2
        eval_batches = 2
        eval_batch_size = 64
        [e2e.arch]
        filters = 8
    "#;
    let cfg = ExperimentConfig::from_toml(toml, None).unwrap();
    let gram = Arc::new(compute_gram(&cfg.grid, &cfg.quadrature).unwrap());
    let run = |name: &str| -> PathBuf {
        let out = out_dir(name);
        run_baseline_sweep(&cfg, &gram, &out, &mut |_| {}).unwrap();
        run_e2e_point(&cfg, &gram, &out, 5.0, -20.0, &mut |_| {}).unwrap();
        out
    };
    let (a, b) = (run("repro-a"), run("repro-b"));
    let point = point_dir(5.0, -20.0);
    let files = [
        "baseline/records.csv".to_string(),
        "baseline/ccdf_R0.csv".into(),
        "baseline/ccdf_R4.csv".into(),
        "baseline/psd_R4.csv".into(),
        format!("{point}/train_log.csv"),
        format!("{point}/ccdf.csv"),
        format!("{point}/psd.csv"),
    ];
    let differing: Vec<&String> = files.iter().filter(|f| std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap()).collect();
    h.check("10", differing.is_empty(), &format!("{} metric CSVs byte-identical across two seeded runs (differing: {differing:?})", files.len()));
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut h = Harness { selected, failed: Vec::new() };
    let criteria: [(u32, fn(&mut Harness)); 10] = [
        (1, gram_identity),
        (2, quadrature),
        (3, gradients),
        (7, multiplier_arithmetic),
        (4, plain_ofdm_papr),
        (6, baseline_rate_check),
        (5, tone_reservation),
        (10, reproducibility),
        (8, desk_training),
        (9, gamma_sweep),
    ];
    for (id, run) in criteria {
        if h.wants(id) {
            let t = Instant::now();
            run(&mut h);
            eprintln!("  criterion {id}: {:.1} s", t.elapsed().as_secs_f64());
        }
    }
    if h.failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} check(s) failed: {}", h.failed.len(), h.failed.join(", "));
        std::process::exit(1);
    }
}
