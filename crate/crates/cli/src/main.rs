use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use face_cli::{bench, fit, simulate};

#[derive(Parser)]
#[command(name = "face", version, about = "Fast covariance estimation for high-dimensional functional data")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "FACE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate eigenfunctions, eigenvalues and scores of a data matrix.
    Fit(fit::FitArgs),
    /// Run a Monte Carlo campaign described by a JSON file.
    Simulate(simulate::SimulateArgs),
    /// Time FACE and the comparison methods over grid sizes.
    Bench(bench::BenchArgs),
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Fit(args) => {
            for report in fit::run(&args)? {
                println!(
                    "{}: N = {}, lambda = {}, eigenvalues = {:?} -> {}",
                    report.mode,
                    report.n_components,
                    report.lambda.map_or("n/a".to_string(), |l| format!("{l:.4e}")),
                    report.eigenvalues,
                    args.out_dir.display()
                );
            }
        }
        Command::Simulate(args) => {
            let result = simulate::run(&args)?;
            print!("{}", result.summary_table());
        }
        Command::Bench(args) => {
            let rows = bench::run(&args)?;
            print!("{}", bench::rows_csv(&rows)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
