use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qbp_cli::config::load_config;
use qbp_cli::experiment::Experiment;
use qbp_cli::figs::{run_fig, FigName};
use qbp_cli::{run_config, CliError};

/// Quantum belief propagation experiments.
#[derive(Debug, Parser)]
#[command(name = "qbp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a JSON experiment config.
    Run {
        config: PathBuf,
        /// Output directory; defaults to the config's `output` field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent grid points; 0 uses every CPU.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Reproduce a figure sweep.
    Fig {
        name: FigName,
        /// Drop grid values of beta above this.
        #[arg(long)]
        beta_max: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, workers } => {
            let c = load_config(&config)?;
            let out = out.unwrap_or_else(|| c.output.clone());
            let s = run_config(&c, &config, &out, workers)?;
            println!("{} of {} grid points converged; results in {}", s.converged, s.points, s.out_dir.display());
        }
        Command::Fig { name, beta_max, out, workers } => {
            let out = out.unwrap_or_else(|| PathBuf::from(format!("figures/{name:?}").to_lowercase()));
            let n = run_fig(name, beta_max, &out, workers)?;
            println!("{n} grid points; results in {}", out.display());
        }
        Command::Validate { config } => {
            let c = load_config(&config)?;
            let exp = Experiment::from_config(&c).map_err(|errors| {
                CliError::Config(qbp_cli::config::ConfigErrors { source: config.display().to_string(), errors })
            })?;
            println!("{}: ok ({} on {}, {} beta value(s))", config.display(), exp.method.name(), exp.graph_id, c.betas().len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
