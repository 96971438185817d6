//! Wire types of the learnwave HTTP service. Everything is JSON.
//!
//! | method | path                      | body                    | reply                     |
//! |--------|---------------------------|-------------------------|---------------------------|
//! | GET    | `/health`                 |                         | [`Health`]                |
//! | POST   | `/v1/config/resolve`      | [`ResolveRequest`]      | `ExperimentConfig`        |
//! | POST   | `/v1/jobs`                | [`JobRequest`]          | [`JobCreated`]            |
//! | GET    | `/v1/jobs/{id}`           |                         | [`JobStatus`]             |
//! | POST   | `/v1/waveform/metrics`    | [`MetricsRequest`]      | [`MetricsResponse`]       |
//! | POST   | `/v1/tone-reservation`    | [`ToneReservationRequest`] | [`ToneReservationResponse`] |
//!
//! Errors come back with a 4xx/5xx status and an [`ErrorBody`].

use std::path::PathBuf;

use learnwave_core::baseline::SolverConfig;
use learnwave_core::experiment::{ExperimentConfig, MetricRecord};
use learnwave_core::waveform::{FreqSymbols, PaprEstimate, QuadratureConfig, SubcarrierGrid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

/// Build a configuration from a profile, optional TOML text and overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolveRequest {
    pub toml: Option<String>,
    pub profile: Option<String>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    /// PRT-count sweep of the tone-reservation baseline.
    Baseline,
    /// Train and evaluate every `(gamma_peak, beta_leak)` target.
    Train,
    /// Evaluate a saved checkpoint.
    Evaluate,
    /// Rate/PAPR table and manifest from the records under the output directory.
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub kind: JobKind,
    pub config: ExperimentConfig,
    /// Required for [`JobKind::Evaluate`].
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobCreated {
    pub id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub fn is_finished(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: u64,
    pub kind: JobKind,
    pub state: JobState,
    /// Progress lines in order of emission.
    pub progress: Vec<String>,
    pub records: Vec<MetricRecord>,
    /// Files written, relative to the configured output directory.
    pub files: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRequest {
    pub grid: SubcarrierGrid,
    pub symbols: Vec<FreqSymbols>,
    pub epsilon: f64,
    #[serde(default)]
    pub quadrature: Option<QuadratureConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub papr: PaprEstimate,
    pub aclr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneReservationRequest {
    pub grid: SubcarrierGrid,
    /// Data symbol; must be zero on the reserved positions.
    pub symbol: FreqSymbols,
    /// Reserved storage positions (0 = lowest tone).
    pub reserved: Vec<usize>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneReservationResponse {
    pub c: FreqSymbols,
    pub peak: f64,
    pub initial_peak: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}
