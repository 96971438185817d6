//! Outer/inner training loop: inner optimizer steps on the augmented
//! Lagrangian, then a multiplier update from a fresh probe batch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lagrangian::ConstraintState;
use super::model::{noise_tensor, ArchConfig, LossContext, Transceiver};
use crate::bits::BitGrid;
use crate::error::{Error, Result};
use crate::nn::{checkpoint, Adam, AdamConfig, Graph, Mode};
use crate::rng::stream;
use crate::units::db_to_linear;
use crate::waveform::{compute_gram, GramPair, OversampledIdft, QuadratureConfig, SubcarrierGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grid: SubcarrierGrid,
    pub k: usize,
    pub snr_db: f64,
    pub gamma_peak_db: f64,
    pub beta_leak_db: f64,
    pub arch: ArchConfig,
    pub outer_iterations: usize,
    pub inner_steps: usize,
    pub batch_size: usize,
    pub probe_batch_size: usize,
    pub optimizer: AdamConfig,
    pub constraints: ConstraintState,
    /// Outer iterations between checkpoints (a final one is always written).
    pub checkpoint_every: usize,
    pub quadrature: QuadratureConfig,
    pub seed: u64,
}

/// Linear targets derived from the dB configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainTargets {
    pub gamma_peak: f64,
    pub beta_leak: f64,
}

impl TrainConfig {
    pub fn targets(&self) -> Result<TrainTargets> {
        if !self.gamma_peak_db.is_finite() || !self.beta_leak_db.is_finite() {
            return Err(Error::Config("targets must be finite dB values".into()));
        }
        let t = TrainTargets { gamma_peak: db_to_linear(self.gamma_peak_db), beta_leak: db_to_linear(self.beta_leak_db) };
        if t.gamma_peak <= 1.0 {
            return Err(Error::Config(format!(
                "gamma_peak {} dB is unreachable: peak power cannot be below the mean",
                self.gamma_peak_db
            )));
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        self.targets()?;
        self.constraints.validate()?;
        self.quadrature.validate()?;
        if self.k == 0 || self.outer_iterations == 0 || self.inner_steps == 0 {
            return Err(Error::Config("K, outer_iterations and inner_steps must be positive".into()));
        }
        if self.batch_size < 2 || self.probe_batch_size < 2 {
            return Err(Error::Config("batch sizes must be at least 2 for batch normalization".into()));
        }
        if self.snr_db.is_nan() {
            return Err(Error::Config("snr_db must be a number".into()));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the training log, written after each outer iteration.
/// Losses come from the probe batch; multipliers are those in force during
/// the iteration (before the update).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub u: usize,
    pub l_c: f64,
    pub l_peak: f64,
    pub l_leak: f64,
    pub lambda_p: f64,
    pub lambda_l: f64,
    pub mu_p: f64,
    pub mu_l: f64,
    pub rate_estimate: f64,
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut s = String::from("u,L_C,L_peak,L_leak,lambda_p,lambda_l,mu_p,mu_l,rate_estimate\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.u, r.l_c, r.l_peak, r.l_leak, r.lambda_p, r.lambda_l, r.mu_p, r.mu_l, r.rate_estimate
        );
    }
    s
}

pub struct TrainOutcome {
    pub model: Transceiver,
    pub log: Vec<LogRow>,
    pub state: ConstraintState,
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Serialize)]
struct CheckpointMeta<'a> {
    config: &'a TrainConfig,
    state: &'a ConstraintState,
}

fn write_checkpoint(dir: &Path, u: usize, model: &Transceiver, cfg: &TrainConfig, state: &ConstraintState) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("iter_{u:05}.ckpt"));
    let meta = serde_json::to_string(&CheckpointMeta { config: cfg, state }).map_err(|e| Error::Checkpoint(e.to_string()))?;
    checkpoint::save(&path, &model.store, &meta)?;
    Ok(path)
}

pub fn loss_context(cfg: &TrainConfig, gram: Arc<GramPair>) -> Result<LossContext> {
    let t = cfg.targets()?;
    Ok(LossContext {
        plan: Arc::new(OversampledIdft::new(cfg.grid)),
        gram,
        gamma_peak: t.gamma_peak,
        beta_leak: t.beta_leak,
    })
}

/// Train from scratch. Checkpoints go to `checkpoint_dir` when given;
/// `progress` sees every log row as it is produced.
pub fn train(cfg: &TrainConfig, checkpoint_dir: Option<&Path>, progress: &mut dyn FnMut(&LogRow)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let gram = Arc::new(compute_gram(&cfg.grid, &cfg.quadrature)?);
    train_with(cfg, gram, checkpoint_dir, progress)
}

pub fn train_with(
    cfg: &TrainConfig,
    gram: Arc<GramPair>,
    checkpoint_dir: Option<&Path>,
    progress: &mut dyn FnMut(&LogRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let ctx = loss_context(cfg, gram)?;
    let n = cfg.grid.n();
    let mut model = Transceiver::new(cfg.grid, cfg.k, &cfg.arch, cfg.seed)?;
    let mut opt = Adam::new(cfg.optimizer);
    let mut state = cfg.constraints;
    let mut bit_rng = stream(cfg.seed, "bits");
    let mut noise_rng = stream(cfg.seed, "noise");
    let mut probe_rng = stream(cfg.seed, "probe");
    let mut log = Vec::with_capacity(cfg.outer_iterations);
    let mut checkpoints = Vec::new();

    for u in 0..cfg.outer_iterations {
        for _ in 0..cfg.inner_steps {
            let bits = BitGrid::random(cfg.batch_size * n, cfg.k, &mut bit_rng);
            let noise = noise_tensor(cfg.batch_size, n, cfg.snr_db, &mut noise_rng);
            let mut g = Graph::new();
            let (_, total) = model.lagrangian(&mut g, &ctx, &bits, &noise, &state, Mode::Train)?;
            let value = g.value(total).item();
            if !value.is_finite() {
                return Err(Error::Diverged { iteration: u, detail: format!("augmented Lagrangian is {value}") });
            }
            let grads = g.backward(total)?;
            model.store.zero_grads();
            g.accumulate_param_grads(&grads, &mut model.store);
            opt.step(&mut model.store)?;
        }

        let bits = BitGrid::random(cfg.probe_batch_size * n, cfg.k, &mut probe_rng);
        let noise = noise_tensor(cfg.probe_batch_size, n, cfg.snr_db, &mut probe_rng);
        let mut g = Graph::new();
        let f = model.forward(&mut g, &ctx, &bits, &noise, Mode::Probe)?;
        let (l_c, l_peak, l_leak) = (g.value(f.bce).item(), g.value(f.l_peak).item(), g.value(f.l_leak).item());
        if !(l_c.is_finite() && l_peak.is_finite() && l_leak.is_finite()) {
            return Err(Error::Diverged {
                iteration: u,
                detail: format!("probe losses L_C={l_c} L_peak={l_peak} L_leak={l_leak}"),
            });
        }
        let row = LogRow {
            u,
            l_c,
            l_peak,
            l_leak,
            lambda_p: state.lambda_p,
            lambda_l: state.lambda_l,
            mu_p: state.mu_p,
            mu_l: state.mu_l,
            rate_estimate: cfg.k as f64 - l_c,
        };
        progress(&row);
        log.push(row);
        state.update(l_peak, l_leak);

        if let Some(dir) = checkpoint_dir {
            let last = u + 1 == cfg.outer_iterations;
            if last || (cfg.checkpoint_every > 0 && (u + 1) % cfg.checkpoint_every == 0) {
                checkpoints.push(write_checkpoint(dir, u + 1, &model, cfg, &state)?);
            }
        }
    }
    Ok(TrainOutcome { model, log, state, checkpoints })
}
