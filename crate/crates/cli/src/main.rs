//! `learnwave` — drive the learnwave service from the shell.
//!
//! Without `--server` an in-process server is started on a loopback port, so
//! the CLI works standalone; with `--server URL` jobs run remotely and output
//! paths are interpreted on the server's filesystem.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use learnwave_api::{JobKind, JobRequest, JobState, ResolveRequest};
use learnwave_client::{Client, ClientError};
use learnwave_core::experiment::MetricRecord;

#[derive(Parser)]
#[command(name = "learnwave", version, about = "OFDM waveform learning experiments")]
struct Cli {
    /// Service URL, e.g. http://127.0.0.1:7878. Default: run an embedded server.
    #[arg(long, global = true, env = "LEARNWAVE_SERVER")]
    server: Option<String>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: SocketAddr,
        /// Jobs allowed to run concurrently.
        #[arg(long, default_value_t = 1)]
        max_jobs: usize,
    },
    /// Tone-reservation baseline sweep over the reserved-tone counts.
    Baseline(Common),
    /// Train and evaluate every (gamma_peak, beta_leak) target.
    Train(Common),
    /// Evaluate a saved checkpoint.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Rate/PAPR table and JSON manifest from the records in the output directory.
    Report(Common),
    /// Print the resolved configuration as TOML.
    Config(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file; its keys override the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    /// desk | paper
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api { status: 400..=499, message, .. } => Failure::Usage(message),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.verb {
        Verb::Serve { addr, max_jobs } => serve(addr, max_jobs).await,
        verb => run(cli.server, verb).await,
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}

async fn serve(addr: SocketAddr, max_jobs: usize) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let (local, handle) = learnwave_server::start(addr, max_jobs).await.map_err(|e| Failure::Runtime(e.to_string()))?;
    eprintln!("learnwave listening on http://{local}");
    handle.await.map_err(|e| Failure::Runtime(e.to_string()))
}

async fn connect(server: Option<String>) -> Result<Client, Failure> {
    match server {
        Some(url) => Ok(Client::new(url)),
        None => {
            let (local, _) = learnwave_server::start(([127, 0, 0, 1], 0).into(), 1)
                .await
                .map_err(|e| Failure::Runtime(format!("cannot start embedded server: {e}")))?;
            Ok(Client::new(format!("http://{local}")))
        }
    }
}

async fn resolve(client: &Client, c: &Common) -> Result<learnwave_core::experiment::ExperimentConfig, Failure> {
    let toml = match &c.config {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let req = ResolveRequest { toml, profile: c.profile.clone(), seed: c.seed, output_dir: c.output.clone() };
    Ok(client.resolve(&req).await?)
}

async fn run(server: Option<String>, verb: Verb) -> Result<(), Failure> {
    let client = connect(server).await?;
    let (kind, common, checkpoint) = match verb {
        Verb::Baseline(c) => (JobKind::Baseline, c, None),
        Verb::Train(c) => (JobKind::Train, c, None),
        Verb::Evaluate { common, checkpoint } => (JobKind::Evaluate, common, Some(checkpoint)),
        Verb::Report(c) => (JobKind::Report, c, None),
        Verb::Config(c) => {
            let cfg = resolve(&client, &c).await?;
            print!("{}", cfg.to_toml().map_err(|e| Failure::Runtime(e.to_string()))?);
            return Ok(());
        }
        Verb::Serve { .. } => unreachable!(),
    };
    let config = resolve(&client, &common).await?;
    let out = config.output_dir.clone();
    let created = client.submit(&JobRequest { kind, config, checkpoint }).await?;
    let status = client.wait(created.id, Duration::from_millis(250), |line| eprintln!("{line}")).await?;
    if status.state == JobState::Failed {
        return Err(Failure::Runtime(status.error.unwrap_or_else(|| "job failed".into())));
    }
    print_records(&status.records);
    for f in &status.files {
        println!("wrote {}", out.join(f).display());
    }
    Ok(())
}

fn print_records(records: &[MetricRecord]) {
    if records.is_empty() {
        return;
    }
    println!("{:<9} {:>3} {:>7} {:>7} {:>7} {:>9} {:>9}", "system", "R", "gamma", "beta", "rate", "PAPR[dB]", "ACLR[dB]");
    for r in records {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.1}"));
        println!(
            "{:<9} {:>3} {:>7} {:>7} {:>7.3} {:>9.2} {:>9}",
            r.system,
            r.reserved.map_or("-".into(), |v| v.to_string()),
            opt(r.gamma_peak_db),
            opt(r.beta_leak_db),
            r.rate,
            r.papr_db,
            format!("{:.1}", r.aclr_db),
        );
    }
}
