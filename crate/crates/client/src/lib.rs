//! Async client for the learnwave service. One method per route.

use std::time::Duration;

use learnwave_api::{
    ErrorBody, Health, JobCreated, JobRequest, JobStatus, MetricsRequest, MetricsResponse, ResolveRequest,
    ToneReservationRequest, ToneReservationResponse,
};
use learnwave_core::experiment::ExperimentConfig;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Transport(#[from] reqwest::Error),
    /// The server answered with an error body.
    #[error("server returned {status}: {message}")]
    Api { status: u16, message: String },
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` like `http://127.0.0.1:7878`.
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        Err(ClientError::Api { status: status.as_u16(), message })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        Self::decode(self.http.get(format!("{}{path}", self.base)).send().await?).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        Self::decode(self.http.post(format!("{}{path}", self.base)).json(body).send().await?).await
    }

    pub async fn health(&self) -> Result<Health> {
        self.get("/health").await
    }

    pub async fn resolve(&self, req: &ResolveRequest) -> Result<ExperimentConfig> {
        self.post("/v1/config/resolve", req).await
    }

    pub async fn submit(&self, req: &JobRequest) -> Result<JobCreated> {
        self.post("/v1/jobs", req).await
    }

    pub async fn job(&self, id: u64) -> Result<JobStatus> {
        self.get(&format!("/v1/jobs/{id}")).await
    }

    /// Poll until the job finishes. `on_progress` sees each new progress line once.
    pub async fn wait(&self, id: u64, every: Duration, mut on_progress: impl FnMut(&str)) -> Result<JobStatus> {
        let mut seen = 0;
        loop {
            let status = self.job(id).await?;
            for line in &status.progress[seen.min(status.progress.len())..] {
                on_progress(line);
            }
            seen = status.progress.len();
            if status.state.is_finished() {
                return Ok(status);
            }
            tokio::time::sleep(every).await;
        }
    }

    pub async fn metrics(&self, req: &MetricsRequest) -> Result<MetricsResponse> {
        self.post("/v1/waveform/metrics", req).await
    }

    pub async fn tone_reservation(&self, req: &ToneReservationRequest) -> Result<ToneReservationResponse> {
        self.post("/v1/tone-reservation", req).await
    }
}
