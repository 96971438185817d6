//! Rate-vs-PAPR table and run manifest.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::sweep::MetricRecord;
use crate::error::{Error, Result};

#[derive(Debug, Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    crate_version: &'static str,
    profile: &'a str,
    config_sha256: String,
    seed: u64,
    /// Named random streams derived from `seed`.
    streams: [&'static str; 7],
    config: &'a ExperimentConfig,
    records: &'a [MetricRecord],
    files: Vec<FileEntry>,
}

pub struct ReportFiles {
    pub table: String,
    pub manifest: String,
}

pub fn rate_papr_table(records: &[MetricRecord]) -> String {
    let mut s = String::from("system,reserved,gamma_peak_db,beta_leak_db,rate,papr_db,aclr_db,aclr_label\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.system,
            opt(r.reserved.map(|v| v.to_string())),
            opt(r.gamma_peak_db.map(|v| v.to_string())),
            opt(r.beta_leak_db.map(|v| v.to_string())),
            r.rate,
            r.papr_db,
            r.aclr_db,
            r.aclr_label()
        );
    }
    s
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Write `report/rate_vs_papr.csv` and `report/manifest.json` under `out`.
/// The manifest lists every curve file with its digest.
pub fn emit_report(cfg: &ExperimentConfig, records: &[MetricRecord], out: &Path) -> Result<ReportFiles> {
    if records.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dir = out.join("report");
    std::fs::create_dir_all(&dir)?;
    let table = "report/rate_vs_papr.csv".to_string();
    std::fs::write(out.join(&table), rate_papr_table(records))?;

    let mut files = vec![FileEntry { path: table.clone(), sha256: sha256_file(&out.join(&table))? }];
    for r in records {
        for f in [&r.ccdf_file, &r.psd_file] {
            files.push(FileEntry { path: f.clone(), sha256: sha256_file(&out.join(f))? });
        }
    }
    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION"),
        profile: &cfg.profile,
        config_sha256: cfg.hash(),
        seed: cfg.seed,
        streams: ["prt", "bits", "noise", "init", "probe", "eval-bits", "eval-noise"],
        config: cfg,
        records,
        files,
    };
    let path = "report/manifest.json".to_string();
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(out.join(&path), json + "\n")?;
    Ok(ReportFiles { table, manifest: path })
}
