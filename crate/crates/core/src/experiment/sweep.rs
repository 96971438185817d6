//! Baseline and learned-system sweeps. Every sweep point writes its curves
//! next to a row of the sweep's `records.csv`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::baseline::baseline_rate_with;
use crate::e2e::{evaluate, log_csv, train_with, Evaluation, Transceiver, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::waveform::{ccdf_from_sorted, db_thresholds, pooled_normalized_powers, psd_estimate, GramPair};

/// One evaluated system (a baseline PRT count or a trained target pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub system: String,
    pub reserved: Option<usize>,
    pub gamma_peak_db: Option<f64>,
    pub beta_leak_db: Option<f64>,
    /// Bits per channel use.
    pub rate: f64,
    pub bce: f64,
    pub ber: f64,
    pub epsilon: f64,
    pub papr_db: f64,
    pub aclr_db: f64,
    /// Paths relative to the output directory.
    pub ccdf_file: String,
    pub psd_file: String,
    pub seed: u64,
}

impl MetricRecord {
    /// ACLR annotation as printed next to each point of the rate/PAPR plot.
    pub fn aclr_label(&self) -> String {
        format!("{:.1} dB", self.aclr_db)
    }
}

pub fn write_records(path: &Path, records: &[MetricRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<MetricRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn write(out: &Path, rel: &str, body: &str) -> Result<String> {
    let path = out.join(rel);
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, body)?;
    Ok(rel.to_string())
}

/// Thresholds of the written CCDF curves: 0 to 13 dB in 0.1 dB steps.
pub fn ccdf_thresholds() -> Vec<f64> {
    db_thresholds(0.0, 13.0, 0.1)
}

pub fn run_baseline_sweep(
    cfg: &ExperimentConfig,
    gram: &GramPair,
    out: &Path,
    progress: &mut dyn FnMut(&str),
) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.baseline.reserved.len());
    for &r in &cfg.baseline.reserved {
        progress(&format!("baseline R={r}: {} symbols", cfg.baseline.n_symbols));
        let run = baseline_rate_with(&cfg.baseline_config(r), gram)?;
        let mut powers = pooled_normalized_powers(&run.signals)?;
        powers.sort_by(f64::total_cmp);
        let ccdf = ccdf_from_sorted(&powers, &ccdf_thresholds())?;
        let psd = psd_estimate(&run.symbols, &cfg.grid, cfg.psd_oversampling)?;
        let m = &run.metrics;
        records.push(MetricRecord {
            system: format!("baseline-R{r}"),
            reserved: Some(r),
            gamma_peak_db: None,
            beta_leak_db: None,
            rate: m.rate,
            bce: m.bce,
            ber: m.ber,
            epsilon: m.papr.epsilon,
            papr_db: m.papr.db,
            aclr_db: m.aclr_db,
            ccdf_file: write(out, &format!("baseline/ccdf_R{r}.csv"), &ccdf.to_csv())?,
            psd_file: write(out, &format!("baseline/psd_R{r}.csv"), &psd.to_csv())?,
            seed: cfg.seed,
        });
        progress(&format!("baseline R={r}: rate {:.4}, PAPR {:.2} dB, ACLR {:.1} dB", m.rate, m.papr.db, m.aclr_db));
    }
    write_records(&out.join("baseline/records.csv"), &records)?;
    Ok(records)
}

/// Directory of one trained point, relative to the output directory.
pub fn point_dir(gamma_peak_db: f64, beta_leak_db: f64) -> String {
    format!("e2e/g{gamma_peak_db}_b{beta_leak_db}")
}

fn e2e_record(
    cfg: &ExperimentConfig,
    out: &Path,
    dir: &str,
    gamma: f64,
    beta: f64,
    ev: &Evaluation,
) -> Result<MetricRecord> {
    let m = &ev.metrics;
    Ok(MetricRecord {
        system: format!("e2e-g{gamma}-b{beta}"),
        reserved: None,
        gamma_peak_db: Some(gamma),
        beta_leak_db: Some(beta),
        rate: m.rate,
        bce: m.bce,
        ber: m.ber,
        epsilon: m.papr.epsilon,
        papr_db: m.papr.db,
        aclr_db: m.aclr_db,
        ccdf_file: write(out, &format!("{dir}/ccdf.csv"), &ev.ccdf.to_csv())?,
        psd_file: write(out, &format!("{dir}/psd.csv"), &ev.psd.to_csv())?,
        seed: cfg.seed,
    })
}

/// Train one `(gamma_peak, beta_leak)` point, evaluate it and write its files.
pub fn run_e2e_point(
    cfg: &ExperimentConfig,
    gram: &Arc<GramPair>,
    out: &Path,
    gamma: f64,
    beta: f64,
    progress: &mut dyn FnMut(&str),
) -> Result<MetricRecord> {
    let tc = cfg.train_config(gamma, beta);
    let dir = point_dir(gamma, beta);
    let ckpt_dir = out.join(&dir).join("checkpoints");
    progress(&format!("train gamma={gamma} dB beta={beta} dB: {} outer iterations", tc.outer_iterations));
    let label = format!("gamma={gamma} beta={beta}");
    let mut outcome = train_with(&tc, gram.clone(), Some(&ckpt_dir), &mut |row| {
        if row.u % 10 == 0 || row.u + 1 == tc.outer_iterations {
            progress(&format!(
                "{label} u={} L_C={:.4} L_peak={:.3e} L_leak={:.3e} rate={:.3}",
                row.u, row.l_c, row.l_peak, row.l_leak, row.rate_estimate
            ));
        }
    })?;
    write(out, &format!("{dir}/train_log.csv"), &log_csv(&outcome.log))?;
    let ev = evaluate(&mut outcome.model, gram, &cfg.eval_config())?;
    let rec = e2e_record(cfg, out, &dir, gamma, beta, &ev)?;
    progress(&format!(
        "{label}: rate {:.4}, PAPR {:.2} dB, ACLR {:.1} dB",
        rec.rate, rec.papr_db, rec.aclr_db
    ));
    Ok(rec)
}

pub fn run_e2e_sweep(
    cfg: &ExperimentConfig,
    gram: &Arc<GramPair>,
    out: &Path,
    progress: &mut dyn FnMut(&str),
) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let mut records = Vec::new();
    for &beta in &cfg.e2e.beta_leak_db {
        for &gamma in &cfg.e2e.gamma_peak_db {
            records.push(run_e2e_point(cfg, gram, out, gamma, beta, progress)?);
        }
    }
    write_records(&out.join("e2e/records.csv"), &records)?;
    Ok(records)
}

#[derive(Deserialize)]
struct CheckpointMeta {
    config: TrainConfig,
}

/// Load a checkpoint written by training and rebuild its transceiver.
pub fn load_checkpoint(path: &Path) -> Result<(Transceiver, TrainConfig)> {
    let (store, meta) = checkpoint::load(path)?;
    let meta: CheckpointMeta =
        serde_json::from_str(&meta).map_err(|e| Error::Checkpoint(format!("bad metadata in {}: {e}", path.display())))?;
    let tc = meta.config;
    let model = Transceiver::from_store(tc.grid, tc.k, &tc.arch, &store)?;
    Ok((model, tc))
}

/// Evaluate a saved checkpoint under the experiment's evaluation settings.
pub fn evaluate_checkpoint(cfg: &ExperimentConfig, gram: &GramPair, path: &Path, out: &Path) -> Result<MetricRecord> {
    let (mut model, tc) = load_checkpoint(path)?;
    if tc.grid != cfg.grid || tc.k != cfg.k {
        return Err(Error::Config(format!(
            "checkpoint grid (N={}, O_s={}) differs from the configured grid (N={}, O_s={})",
            tc.grid.n(),
            tc.grid.oversampling(),
            cfg.grid.n(),
            cfg.grid.oversampling()
        )));
    }
    let ev = evaluate(&mut model, gram, &cfg.eval_config())?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint");
    let dir = format!("{}/eval_{stem}", point_dir(tc.gamma_peak_db, tc.beta_leak_db));
    let rec = e2e_record(cfg, out, &dir, tc.gamma_peak_db, tc.beta_leak_db, &ev)?;
    write_records(&out.join(&dir).join("records.csv"), std::slice::from_ref(&rec))?;
    Ok(rec)
}

/// Records of every sweep found under `out`, baseline first.
pub fn collect_records(out: &Path) -> Result<Vec<MetricRecord>> {
    let mut all = Vec::new();
    for rel in ["baseline/records.csv", "e2e/records.csv"] {
        let p: PathBuf = out.join(rel);
        if p.exists() {
            all.extend(read_records(&p)?);
        }
    }
    Ok(all)
}
