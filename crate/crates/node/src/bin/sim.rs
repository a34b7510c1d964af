use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ivise_core::query::Scope;
use ivise_node::sim::{random_edges, run_topology, SceneParams, TopologyConfig};

/// Runs a simulated edge/fog topology and writes metrics and reports.
#[derive(Parser)]
#[command(name = "sim", version)]
struct Args {
    /// Number of edge cameras.
    #[arg(long)]
    edges: usize,
    /// Frames per edge.
    #[arg(long)]
    frames: u64,
    /// Operator query, e.g. "grey T-shirt, blue jeans".
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    drop_ratio: f64,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    /// Per-channel pixel noise amplitude.
    #[arg(long, default_value_t = 0)]
    noise: u8,
    /// Most persons per scene.
    #[arg(long, default_value_t = 3)]
    persons: usize,
    /// Record wall-clock latency (makes the metrics file non-reproducible).
    #[arg(long)]
    measure_latency: bool,
}

fn run(args: &Args) -> Result<(), Box<dyn std::error::Error>> {
    if args.edges == 0 {
        return Err("--edges must be at least 1".into());
    }
    fs::create_dir_all(&args.out)?;
    let params = SceneParams {
        width: args.width,
        height: args.height,
        noise: args.noise,
        max_persons: args.persons,
        ..SceneParams::default()
    };
    let edges = random_edges(args.edges, args.seed, &params);
    let config = TopologyConfig {
        frames: args.frames,
        query: args.query.clone(),
        scope: Scope::All,
        drop_ratio: args.drop_ratio,
        seed: args.seed,
        measure_latency: args.measure_latency,
        ..TopologyConfig::default()
    };
    let run = run_topology(&config, edges)?;
    run.metrics.write_csv(&args.out.join("metrics.csv"))?;
    run.metrics.write_summary_csv(&args.out.join("summary.csv"))?;
    fs::write(args.out.join("cameras.txt"), run.fog.registry().render())?;
    let mut reports = fs::File::create(args.out.join("reports.jsonl"))?;
    for r in &run.reports {
        writeln!(reports, "{}", serde_json::to_string(r)?)?;
    }
    let s = run.metrics.summary();
    println!("query {}: {}", run.query.id, run.query.render());
    println!("frames processed {} of {}", s.frames_processed, s.frames);
    println!("reports {}  precision {:.3}  recall {:.3}", s.reports, s.precision, s.recall);
    if let Some(r) = s.mean_ratio {
        println!("mean sent/raw ratio {r:.6}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sim: {e}");
            ExitCode::FAILURE
        }
    }
}
