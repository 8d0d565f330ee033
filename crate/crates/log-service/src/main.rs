use std::sync::Arc;

use clap::Parser;
use larch_log::config::Config;
use larch_log::{http, LogService};

fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cfg = Config::parse();
    match run(cfg) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("larch-log: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cfg: Config) -> std::io::Result<()> {
    let svc = Arc::new(LogService::open(cfg.service())?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(cfg.bind).await?;
        let addr = listener.local_addr()?;
        println!("listening on {addr}");
        tracing::info!(%addr, data_dir = %cfg.data_dir.display(), profile = ?cfg.reps_profile, "log service started");
        http::serve(listener, svc, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}
