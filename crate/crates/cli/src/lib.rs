//! Command-line driver: reads a JSON run configuration, executes the
//! experiment and writes `results.csv` and `meta.json`.

pub mod config;
pub mod error;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
pub use run::{run, RunSummary};

/// Environment variable overriding the worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "NRM_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "nrm", version, about = "Network revenue management experiments")]
struct Args {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = parse_config(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output = out.clone();
    }
    match (args.workers, std::env::var(WORKERS_ENV)) {
        (Some(w), _) => config.workers = Some(w),
        (None, Ok(v)) => {
            let w = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{WORKERS_ENV}: not a worker count: {v:?}")))?;
            config.workers = Some(w);
        }
        (None, Err(_)) => {}
    }
    config.validate()?;
    Ok(config)
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nrm: {e}");
            return e.exit_code();
        }
    };
    match run(&config) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("nrm: {e}");
            e.exit_code()
        }
    }
}
