use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hymlab_cli::config::ExperimentConfig;
use hymlab_cli::run::{run, CliError};

/// Runs one hymlab experiment described by a configuration file.
#[derive(Parser, Debug)]
#[command(name = "hymlab", version)]
struct Args {
    /// Configuration file; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides [parallel] workers).
    #[arg(long, env = "HYMLAB_WORKERS")]
    workers: Option<usize>,
    /// Random seed (overrides [bundle] seed).
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(args: Args) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = args.out {
        cfg.output.dir = o;
    }
    if let Some(w) = args.workers {
        cfg.parallel.workers = w;
    }
    if let Some(s) = args.seed {
        cfg.bundle.seed = s;
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallel.workers)
        .build()
        .map_err(|e| CliError::Module { context: "thread pool".into(), message: e.to_string() })?;
    let manifest = pool.install(|| run(&cfg))?;
    for p in &manifest.outputs {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
