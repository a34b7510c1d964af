use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use ivise_node::clock::SystemClock;
use ivise_node::config::EdgeConfig;
use ivise_node::edge::runtime::start_from_config;

/// Camera-side agent: extracts per-person features and streams them to the fog.
#[derive(Parser)]
#[command(name = "edge", version)]
struct Args {
    /// Edge configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let config = match EdgeConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    match start_from_config(&config, Arc::new(SystemClock)) {
        Ok(runtime) => {
            if let Some(addr) = runtime.status_addr() {
                log::info!("status page on {addr}");
            }
            runtime.join();
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
