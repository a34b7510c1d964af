use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use ivise_node::clock::SystemClock;
use ivise_node::config::FogConfig;
use ivise_node::fog::{FogNode, FogServer};

/// Fog coordinator: accepts edge connections and operator queries.
#[derive(Parser)]
#[command(name = "fog", version)]
struct Args {
    /// Fog configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let config = match FogConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    let node = match FogNode::from_config(&config, Arc::new(SystemClock)) {
        Ok(n) => Arc::new(n),
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    match FogServer::start(node, &config.fog.listen_addr, &config.fog.operator_addr) {
        Ok(_server) => loop {
            std::thread::park();
        },
        Err(e) => {
            log::error!("cannot listen: {e}");
            ExitCode::FAILURE
        }
    }
}
