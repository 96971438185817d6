use learnwave_api::{JobKind, JobRequest};
use learnwave_core::experiment::{
    collect_records, emit_report, evaluate_checkpoint, run_baseline_sweep, run_e2e_sweep, MetricRecord,
};
use learnwave_core::Error;

use crate::AppState;

pub(crate) struct JobOutput {
    pub records: Vec<MetricRecord>,
    pub files: Vec<String>,
}

/// Request validation done before a job is queued.
pub(crate) fn check(req: &JobRequest) -> Result<(), Error> {
    req.config.validate()?;
    if req.kind == JobKind::Evaluate && req.checkpoint.is_none() {
        return Err(Error::Config("evaluate needs a checkpoint path".into()));
    }
    Ok(())
}

fn curve_files(records: &[MetricRecord]) -> Vec<String> {
    records.iter().flat_map(|r| [r.ccdf_file.clone(), r.psd_file.clone()]).collect()
}

pub(crate) fn run(state: &AppState, id: u64, req: &JobRequest) -> Result<JobOutput, Error> {
    let cfg = &req.config;
    let out = cfg.output_dir.as_path();
    let mut progress = |line: &str| {
        tracing::debug!(id, "{line}");
        state.update_job(id, |j| j.progress.push(line.to_string()));
    };
    match req.kind {
        JobKind::Baseline => {
            let gram = state.gram(&cfg.grid, &cfg.quadrature)?;
            let records = run_baseline_sweep(cfg, &gram, out, &mut progress)?;
            let mut files = curve_files(&records);
            files.push("baseline/records.csv".into());
            Ok(JobOutput { records, files })
        }
        JobKind::Train => {
            let gram = state.gram(&cfg.grid, &cfg.quadrature)?;
            let records = run_e2e_sweep(cfg, &gram, out, &mut progress)?;
            let mut files = curve_files(&records);
            files.push("e2e/records.csv".into());
            Ok(JobOutput { records, files })
        }
        JobKind::Evaluate => {
            let path = req.checkpoint.as_deref().ok_or_else(|| Error::Config("missing checkpoint".into()))?;
            let gram = state.gram(&cfg.grid, &cfg.quadrature)?;
            progress(&format!("evaluating {}", path.display()));
            let record = evaluate_checkpoint(cfg, &gram, path, out)?;
            let records = vec![record];
            Ok(JobOutput { files: curve_files(&records), records })
        }
        JobKind::Report => {
            let records = collect_records(out)?;
            if records.is_empty() {
                return Err(Error::Config(format!(
                    "no records under {}; run `baseline` or `train` first",
                    out.display()
                )));
            }
            let files = emit_report(cfg, &records, out)?;
            Ok(JobOutput { records, files: vec![files.table, files.manifest] })
        }
    }
}
