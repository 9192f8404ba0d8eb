use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polycbo::cli::{execute, Mode};

#[derive(Parser)]
#[command(version, about = "Consensus-based optimization experiments")]
struct Args {
    /// What to run.
    #[arg(value_enum)]
    mode: Mode,
    /// JSON experiment configuration (or a previous run's meta.json).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    if let Some(n) = std::env::var("POLYCBO_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let code = execute(args.mode, &args.config, args.seed, args.out);
    ExitCode::from(code as u8)
}
