use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use entropyeq::config::EntropySpec;
use entropyeq::{run, Command, RunConfig, EXIT_ERROR};

/// Entropy minimization under local density and kinetic-energy constraints.
///
/// Writes report.json and CSV tables into the output directory. Exit status:
/// 0 converged (and checks passed), 2 flagged, 1 config or feasibility error.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Command,
    /// JSON run configuration; every field has a default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of grid nodes.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Regularized entropy with this eta; 0 selects the Boltzmann entropy.
    #[arg(long)]
    eta: Option<f64>,
    /// Seed for probes and random states.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which this tool reserves for flagged runs.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let mut config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("entropyeq: {e}");
                return ExitCode::from(EXIT_ERROR as u8);
            }
        },
        None => RunConfig::default(),
    };
    config.command = Some(cli.command);
    if let Some(out) = cli.out {
        config.output = out;
    }
    if let Some(n) = cli.grid_points {
        config.grid_points = n;
    }
    if let Some(eta) = cli.eta {
        config.entropy = EntropySpec::from_eta(eta);
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match run(&config) {
        Ok(report) => {
            println!("{}", config.output.join("report.json").display());
            ExitCode::from(report.status.exit_code as u8)
        }
        Err(e) => {
            eprintln!("entropyeq: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
