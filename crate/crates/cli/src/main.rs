use std::path::PathBuf;
use std::process::exit;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use mloglin_cli::run::{run, Command, RunConfig};

/// Marginal log-linear models for discrete multiway tables: constrained
/// maximum likelihood, mediation analysis, simulation, and self-checks.
#[derive(Parser)]
#[command(name = "mloglin", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model to a counts table and write estimates and a summary
    Fit {
        /// Counts CSV: one column per variable plus a `count` column
        #[arg(long)]
        data: PathBuf,
        /// Model specification JSON
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for estimates.csv and summary.txt
        #[arg(long)]
        out: PathBuf,
    },
    /// Natural direct/indirect effect decomposition with bootstrap errors
    Mediate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `adjacent`, `baseline`, or comma-separated `from-to` pairs
        #[arg(long, default_value = "adjacent")]
        transitions: String,
        /// Bootstrap replicates
        #[arg(long = "B", default_value_t = 500)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draw a multinomial sample from the table defined by a spec's `theta`
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Sample size
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive the library's identities on random tables and report
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Override every check's tolerance
        #[arg(long)]
        tol: Option<f64>,
    },
}

impl Cli {
    fn into_config(self) -> RunConfig {
        match self.command {
            Cmd::Fit { data, spec, out } => RunConfig {
                command: Command::Fit { data, spec, out },
                seed: 0,
            },
            Cmd::Mediate {
                data,
                spec,
                out,
                transitions,
                bootstrap,
                seed,
            } => RunConfig {
                command: Command::Mediate {
                    data,
                    spec,
                    out,
                    transitions,
                    bootstrap,
                },
                seed,
            },
            Cmd::Simulate { spec, n, seed, out } => RunConfig {
                command: Command::Simulate { spec, n, out },
                seed,
            },
            Cmd::Verify { seed, trials, tol } => RunConfig {
                command: Command::Verify { trials, tol },
                seed,
            },
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            exit(code);
        }
    };
    match run(&cli.into_config()) {
        Ok(code) => exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            exit(e.exit_code());
        }
    }
}
