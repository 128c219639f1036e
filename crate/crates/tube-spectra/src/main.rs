use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tube_spectra::config::{self, Mode, Overrides};
use tube_spectra::{pipeline, Error};

/// Spectral laboratory for the Dirichlet Laplacian on thin curved tubes and
/// surface strips.
#[derive(Parser)]
#[command(name = "tube-spectra", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue table for one geometry at the finest eps
    Spectrum(RunArgs),
    /// eps-convergence sweep with fitted rates
    Sweep(RunArgs),
    /// Nodal-line crossings of each computed mode
    Nodal(RunArgs),
    /// Internal consistency suites (oracle, Sturm, Poincare, unitarity, Kronecker)
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; built-in defaults apply when absent
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.csv, summary.json, nodal_<n>.csv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for solver starting vectors and validation batches
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated eps list, strictly decreasing (e.g. 0.2,0.1,0.05)
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    eps: Option<Vec<f64>>,
    /// Number of eigenpairs to compute
    #[arg(long)]
    n: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Spectrum(a) => (Mode::Spectrum, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Nodal(a) => (Mode::Nodal, a),
        Command::Validate(a) => (Mode::Validate, a),
    };
    let overrides = Overrides {
        mode: Some(mode),
        seed: args.seed,
        epsilons: args.eps,
        n_pairs: args.n,
        out_dir: args.out,
    };
    match config::load(args.config.as_deref(), &overrides).and_then(|cfg| pipeline::run(&cfg)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
