//! `rlo`: redundant LiDAR odometry on KITTI-format sequences.
//!
//! Subcommands: `run` a sequence through the pipeline, `eval` a trajectory
//! against ground truth with the segment-based relative-error metric, and
//! `plotdata` to turn a run trace into gnuplot-ready data files.
//!
//! Exit codes: 0 success, 1 usage, 2 data/format/config error, 3 internal.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rlo_core::EstimatorId;

#[derive(Parser)]
#[command(
    name = "rlo",
    version,
    about = "Redundant LiDAR odometry",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the odometry pipeline over a KITTI-format sequence directory.
    Run(RunArgs),
    /// Evaluate an estimated trajectory against ground truth.
    Eval(EvalArgs),
    /// Export plot-ready data series from a run trace.
    Plotdata(PlotdataArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Sequence directory (contains velodyne/*.bin, optional times.txt,
    /// calib.txt, poses.txt).
    #[arg(long)]
    sequence: PathBuf,
    /// Pipeline configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for poses.txt, trace.csv and summary.txt.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated estimator subset overriding the configuration
    /// (e.g. `p2p_icp,ndt`); the constant-velocity model is always on.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorId>>,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated trajectory in KITTI pose format.
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth trajectory in KITTI pose format.
    #[arg(long)]
    gt: PathBuf,
    /// Optional per-segment error CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct PlotdataArgs {
    /// Trace CSV written by `run`.
    #[arg(long)]
    trace: PathBuf,
    /// Output directory for the .dat series.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are not usage errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let outcome = std::panic::catch_unwind(|| match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Plotdata(args) => commands::plotdata(&args),
    });
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(2)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
