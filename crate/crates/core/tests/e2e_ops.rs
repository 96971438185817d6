mod common;

use std::sync::Arc;

use common::*;
use learnwave_core::bits::{bit_cross_entropy, BitGrid, LlrGrid};
use learnwave_core::e2e::ops::{aclr_ratio, bce_logits, idft, papr_hinge, power_normalize};
use learnwave_core::e2e::{
    augmented_lagrangian, loss_aclr, loss_bce, loss_papr, normalize_batch, to_symbols, ArchConfig, ConstraintState,
    LossContext, Transceiver,
};
use learnwave_core::nn::{Graph, Mode, Tensor};
use learnwave_core::waveform::{aclr, build_grid, compute_gram, FreqSymbols, OversampledIdft, QuadratureConfig};
use num_complex::Complex64;
use rand::Rng;

fn small_ctx(n: usize, gamma: f64, beta: f64) -> LossContext {
    let grid = build_grid(n, 4).unwrap();
    LossContext {
        plan: Arc::new(OversampledIdft::new(grid)),
        gram: Arc::new(compute_gram(&grid, &QuadratureConfig::default()).unwrap()),
        gamma_peak: gamma,
        beta_leak: beta,
    }
}

#[test]
fn power_normalize_contract_and_gradient() {
    let mut r = rng(20);
    let x = randn(&mut r, vec![4, 7, 2]);
    let mut g = Graph::new();
    let v = g.input(x.clone());
    let (y, _) = power_normalize(&mut g, v).unwrap();
    let e: f64 = g.value(y).data().iter().map(|a| a * a).sum();
    assert!((e / 28.0 - 1.0).abs() < 1e-12);

    let mut scaled = x.clone();
    scaled.data_mut().iter_mut().for_each(|a| *a *= 7.0);
    let v2 = g.input(scaled);
    let (y2, _) = power_normalize(&mut g, v2).unwrap();
    for (a, b) in g.value(y).data().iter().zip(g.value(y2).data()) {
        assert!((a - b).abs() < 1e-13);
    }

    let zeros = g.input(Tensor::zeros(vec![2, 7, 2]));
    assert!(power_normalize(&mut g, zeros).is_err());

    let c = randn(&mut r, vec![4, 7, 2]);
    let err = input_grad_error(&[x], 10, 1, |g, v| {
        let (y, _) = power_normalize(g, v[0]).unwrap();
        readout(g, y, &c)
    });
    assert!(err < 1e-4, "{err}");
}

#[test]
fn idft_gradient() {
    let ctx = small_ctx(5, 2.0, 0.01);
    let mut r = rng(21);
    let x = randn(&mut r, vec![3, 5, 2]);
    let c = randn(&mut r, vec![3, 20, 2]);
    let err = input_grad_error(&[x], 10, 2, |g, v| {
        let z = idft(g, &ctx.plan, v[0]).unwrap();
        readout(g, z, &c)
    });
    assert!(err < 1e-4, "{err}");
}

#[test]
fn papr_hinge_matches_loop_oracle_and_gradient() {
    let ctx = small_ctx(7, 1.8, 0.01);
    let mut r = rng(22);
    for trial in 0..5 {
        let x = randn(&mut r, vec![4, 7, 2]);
        // brute force: explicit exponential sums, explicit hinge loop
        let syms = to_symbols(&x);
        let m = 28;
        let mut powers = Vec::new();
        for s in &syms {
            for k in 0..m {
                let t = -0.5 + (k as f64 + 0.5) / m as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for (pos, v) in s.0.iter().enumerate() {
                    let idx = pos as f64 - 3.0;
                    acc += v * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * idx * t);
                }
                powers.push((acc / (m as f64).sqrt()).norm_sqr());
            }
        }
        let mean: f64 = powers.iter().sum::<f64>() / powers.len() as f64;
        let mut want = 0.0;
        for p in &powers {
            if p / mean > 1.8 {
                want += p / mean - 1.8;
            }
        }
        want /= powers.len() as f64;
        let reference = loss_papr(&syms, &ctx.plan, 1.8).unwrap();
        let mut g = Graph::new();
        let v = g.input(x.clone());
        let z = idft(&mut g, &ctx.plan, v).unwrap();
        let l = papr_hinge(&mut g, z, 1.8).unwrap();
        assert!((g.value(l).item() - want).abs() < 1e-9, "trial {trial}");
        assert!((reference - want).abs() < 1e-9, "trial {trial}");

        let err = input_grad_error(&[x], 10, trial, |g, v| {
            let z = idft(g, &ctx.plan, v[0]).unwrap();
            papr_hinge(g, z, 1.8).unwrap()
        });
        assert!(err < 1e-4, "trial {trial}: {err}");
    }
}

#[test]
fn papr_hinge_zero_for_flat_power() {
    let ctx = small_ctx(5, 2.0, 0.01);
    let grid = *ctx.plan.grid();
    let tone = FreqSymbols::tone(&grid, grid.index_at(1)).unwrap();
    assert_eq!(loss_papr(&[tone], &ctx.plan, 2.0).unwrap(), 0.0);
}

#[test]
fn aclr_ratio_matches_metric_and_gradient() {
    let ctx = small_ctx(5, 2.0, 0.01);
    let mut r = rng(23);
    let x = randn(&mut r, vec![3, 5, 2]);
    let syms = to_symbols(&x);
    let mut g = Graph::new();
    let v = g.input(x.clone());
    let l = aclr_ratio(&mut g, &ctx.gram, v, 0.01).unwrap();
    let want = aclr(&syms, &ctx.gram).unwrap() - 0.01;
    assert!((g.value(l).item() - want).abs() < 1e-12);
    assert!((loss_aclr(&syms, &ctx.gram, 0.01).unwrap() - want).abs() < 1e-12);

    let err = input_grad_error(&[x], 10, 3, |g, v| aclr_ratio(g, &ctx.gram, v[0], 0.01).unwrap());
    assert!(err < 1e-4, "{err}");
}

#[test]
fn aclr_single_tone_closed_form() {
    let grid = build_grid(3, 4).unwrap();
    let gram = compute_gram(&grid, &QuadratureConfig::default()).unwrap();
    let tone = FreqSymbols::tone(&grid, grid.index_at(0)).unwrap();
    let got = loss_aclr(&[tone], &gram, 0.02).unwrap();
    assert!((got - (1.0 / gram.v_entry(0, 0) - 1.0 - 0.02)).abs() < 1e-12);
}

#[test]
fn bce_matches_probability_oracle_and_gradient() {
    let mut r = rng(24);
    let l = randn(&mut r, vec![2, 3, 4]);
    let bits: Vec<u8> = (0..24).map(|_| r.random_range(0..2)).collect();
    let mut want = 0.0;
    for (&li, &b) in l.data().iter().zip(&bits) {
        let p1 = 1.0 / (1.0 + (-li).exp());
        want -= if b == 1 { p1.log2() } else { (1.0 - p1).log2() };
    }
    want /= 6.0;
    let mut g = Graph::new();
    let v = g.input(l.clone());
    let node = bce_logits(&mut g, v, &bits).unwrap();
    assert!((g.value(node).item() - want).abs() < 1e-9);
    let grid = BitGrid::new(6, 4, bits.clone()).unwrap();
    let llrs = LlrGrid { rows: 6, k: 4, llrs: l.data().to_vec() };
    assert!((loss_bce(&llrs, &grid).unwrap() - want).abs() < 1e-9);
    for &li in l.data() {
        let (p1, p0) = (2f64.powf(-bit_cross_entropy(li, 1)), 2f64.powf(-bit_cross_entropy(li, 0)));
        assert!((p1 + p0 - 1.0).abs() < 1e-12);
    }
    let err = input_grad_error(&[l], 10, 4, |g, v| bce_logits(g, v[0], &bits).unwrap());
    assert!(err < 1e-4, "{err}");
}

#[test]
fn normalization_energy_contract() {
    let mut r = rng(25);
    let batch: Vec<FreqSymbols> = (0..5)
        .map(|_| FreqSymbols((0..9).map(|_| Complex64::new(r.random(), r.random())).collect()))
        .collect();
    let (out, _) = normalize_batch(&batch).unwrap();
    let e: f64 = out.iter().map(|x| x.energy()).sum();
    assert!((e - 45.0).abs() < 1e-9);
}

fn tiny_model() -> (Transceiver, LossContext, BitGrid, Tensor) {
    let grid = build_grid(5, 4).unwrap();
    let ctx = LossContext {
        plan: Arc::new(OversampledIdft::new(grid)),
        gram: Arc::new(compute_gram(&grid, &QuadratureConfig::default()).unwrap()),
        gamma_peak: 1.5,
        beta_leak: 0.01,
    };
    let arch = ArchConfig { filters: 4, blocks: vec![(3, 1), (3, 2)] };
    let model = Transceiver::new(grid, 2, &arch, 9).unwrap();
    let mut r = rng(26);
    let bits = BitGrid::random(4 * 5, 2, &mut r);
    let noise = {
        let mut t = randn(&mut r, vec![4, 5, 2]);
        t.data_mut().iter_mut().for_each(|v| *v *= 0.3);
        t
    };
    (model, ctx, bits, noise)
}

#[test]
fn full_pipeline_gradient() {
    let (model, ctx, bits, noise) = tiny_model();
    let state = ConstraintState { lambda_p: 0.7, lambda_l: 0.2, mu_p: 0.5, mu_l: 0.3, ..ConstraintState::default() };
    let arch = model.arch.clone();
    let grid = model.grid;
    let err = param_grad_error(&model.store, 20, 11, |g, store| {
        let mut m = Transceiver::from_store(grid, 2, &arch, store).unwrap();
        let (_, total) = m.lagrangian(g, &ctx, &bits, &noise, &state, Mode::Train).unwrap();
        total
    });
    assert!(err < 1e-3, "{err}");
}

#[test]
fn lagrangian_node_matches_scalar_form() {
    let (mut model, ctx, bits, noise) = tiny_model();
    let state = ConstraintState { lambda_p: 0.4, lambda_l: 0.05, mu_p: 0.2, mu_l: 0.01, ..ConstraintState::default() };
    let mut g = Graph::new();
    let (f, total) = model.lagrangian(&mut g, &ctx, &bits, &noise, &state, Mode::Probe).unwrap();
    let want = augmented_lagrangian(g.value(f.bce).item(), g.value(f.l_peak).item(), g.value(f.l_leak).item(), &state).unwrap();
    assert!((g.value(total).item() - want).abs() < 1e-12);
}

#[test]
fn transmitter_contracts() {
    let grid = build_grid(7, 4).unwrap();
    let mut model = Transceiver::new(grid, 4, &ArchConfig::with_filters(8), 5).unwrap();
    let mut r = rng(27);
    let mut bits = BitGrid::random(8 * 7, 4, &mut r).as_slice().to_vec();
    // element 1 repeats element 0
    let (head, tail) = bits.split_at_mut(28);
    tail[..28].copy_from_slice(head);
    let bits = BitGrid::new(56, 4, bits).unwrap();
    let mut g = Graph::new();
    let x = model.transmit(&mut g, &bits, Mode::Probe).unwrap();
    let v = g.value(x).data();
    let e: f64 = v.iter().map(|a| a * a).sum::<f64>() / 8.0;
    assert!((e / 7.0 - 1.0).abs() < 1e-6);
    assert_eq!(&v[..14], &v[14..28]);

    for id in model.store.ids().collect::<Vec<_>>() {
        if model.store.entry(id).trainable && !model.store.entry(id).name.ends_with("scale") {
            model.store.get_mut(id).data_mut().fill(0.0);
        }
    }
    let mut g = Graph::new();
    assert!(model.transmit(&mut g, &bits, Mode::Train).is_err());
}

#[test]
fn receiver_affine_exit() {
    let grid = build_grid(7, 4).unwrap();
    let mut model = Transceiver::new(grid, 4, &ArchConfig::with_filters(8), 5).unwrap();
    let pw = model.rx.exit.pointwise;
    let b = model.rx.exit.bias;
    model.store.get_mut(pw).data_mut().fill(0.0);
    model.store.get_mut(b).data_mut().copy_from_slice(&[0.5, -1.0, 2.0, 0.0]);
    let mut g = Graph::new();
    let y = g.input(Tensor::zeros(vec![3, 7, 2]));
    let l = model.receive(&mut g, y, Mode::Train).unwrap();
    for row in g.value(l).data().chunks_exact(4) {
        assert_eq!(row, &[0.5, -1.0, 2.0, 0.0]);
    }
}
