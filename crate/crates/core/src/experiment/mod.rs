//! Reproduction harness: configuration profiles, sweeps over PRT counts and
//! constraint targets, and report files.

pub mod config;
pub mod report;
pub mod sweep;

pub use config::{BaselineSweep, E2eSweep, ExperimentConfig, PROFILES};
pub use report::{emit_report, rate_papr_table, ReportFiles};
pub use sweep::{
    collect_records, evaluate_checkpoint, load_checkpoint, point_dir, read_records, run_baseline_sweep, run_e2e_point,
    run_e2e_sweep, write_records, MetricRecord,
};
