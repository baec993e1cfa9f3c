use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rhodyn_cli::{parse_config_with, run_scenario, CliError, Overrides};

/// Runs one reduced-density-matrix scenario and writes CSV artifacts.
#[derive(Debug, Parser)]
#[command(name = "rhodyn", version)]
struct Args {
    /// Scenario configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name, replacing the one in the config.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Suppress the run summary.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let overrides = Overrides {
        scenario: args.scenario.clone(),
        out_dir: args.out_dir.clone(),
        seed: args.seed,
        grid_n: args.grid_n,
        dt: args.dt,
        steps: args.steps,
    };
    let cfg = parse_config_with(&text, &overrides)?;
    let summary = run_scenario(&cfg)?;
    if !args.quiet {
        println!("scenario {} -> {}", cfg.scenario, cfg.output.out_dir.display());
        for line in &summary.lines {
            println!("  {line}");
        }
        println!("  {} files written", summary.files.len());
    }
    Ok(())
}
