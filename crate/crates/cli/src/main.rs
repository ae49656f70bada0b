//! `wm1`: batch front end for the path-analysis library.
//!
//! Exit codes: 0 success, 2 parse or I/O failure, 3 shape mismatch,
//! 4 inadmissible control, 5 violated numeric contract, 1 anything else.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "wm1",
    version,
    about = "Cadlag path analysis under the weak-M1 topology",
    after_help = "Exit codes: 0 ok, 2 parse/IO error, 3 shape mismatch, 4 inadmissible control, \
                  5 numeric contract violation, 1 other failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file (directory for multi-file commands); standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Uniform, product, weak-M1 and J1 distances between two paths.
    Distance {
        first: PathBuf,
        second: PathBuf,
        /// Waypoints per jump in the weak-metric search.
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Total-variation parametric representation of a path.
    Paramrep {
        path: PathBuf,
        /// Trace points for CSV output.
        #[arg(long, default_value_t = 1001)]
        probes: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Oscillation profile and compactness diagnostics for a family of paths.
    Oscillation {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Comma-separated widths.
        #[arg(long, default_value = "0.01,0.05,0.1,0.5")]
        delta_grid: String,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Clock, inverse clock and stretched version of a control.
    Stretch {
        control: PathBuf,
        /// Comma-separated clock direction; all ones when omitted.
        #[arg(long)]
        direction: Option<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Runs the two-jump example end to end and writes traces and tables into a directory.
    DemoExample {
        /// Comma-separated sequence indices.
        #[arg(long, default_value = "2,10,100,1000,10000")]
        n_range: String,
        #[arg(long, default_value_t = 8)]
        budget: usize,
        /// Output directory.
        #[arg(long, default_value = "demo-output")]
        out: PathBuf,
    },
    /// Monte Carlo cost of one control for a problem.
    Simulate {
        problem: PathBuf,
        control: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sampled state paths to include in the JSON report.
        #[arg(long, default_value_t = 0)]
        keep: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Cost convergence along a directory of controls (limit in `limit.json`).
    Experiment {
        problem: PathBuf,
        controls: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 1000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "0.01,0.05,0.1,0.5")]
        delta_grid: String,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[command(flatten)]
        output: Output,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<wm1::Error>() {
            return match e {
                wm1::Error::Shape(_) => 3,
                wm1::Error::Admissibility { .. } => 4,
                wm1::Error::Domain(_)
                | wm1::Error::Contract(_)
                | wm1::Error::Membership { .. }
                | wm1::Error::Rank(_)
                | wm1::Error::Infeasible => 5,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<io::ParseError>().is_some()
        {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
