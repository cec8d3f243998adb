use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Parser;
use sphinv_model::checkpoint::Checkpoint;
use sphinv_model::inversion::InversionConfig;
use sphinv_service::{router, AppState, ModelSnapshot};

#[derive(Parser)]
#[command(name = "sphinv-serve", version, about = "HTTP API for interactive inversion and editing")]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "SPHINV_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    /// Model checkpoint written by `sphinv train-encoders`.
    #[arg(long, env = "SPHINV_CHECKPOINT")]
    checkpoint: PathBuf,
    /// Sessions kept in memory at once.
    #[arg(long, env = "SPHINV_MAX_SESSIONS", default_value_t = 64)]
    max_sessions: usize,
    /// Inversions allowed to run concurrently.
    #[arg(long, env = "SPHINV_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Default per-target optimization iterations; requests may override.
    #[arg(long, env = "SPHINV_STEP3_ITERATIONS")]
    step3_iterations: Option<usize>,
}

#[tokio::main]
async fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let ck = Checkpoint::read(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let mut defaults = InversionConfig::default();
    if let Some(it) = args.step3_iterations {
        defaults.step3_iterations = it;
    }
    let snapshot = ModelSnapshot::new(ck.models(), defaults).map_err(|e| anyhow::anyhow!("{e}"))?;
    let state = Arc::new(AppState::new(snapshot, args.max_sessions, args.workers));
    let listener =
        tokio::net::TcpListener::bind(args.listen).await.with_context(|| format!("binding {}", args.listen))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
