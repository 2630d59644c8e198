//! `xyqaoa` command-line front end.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// QAOA state transfer on an XY spin chain: simulate, optimize, sweep, fit
/// and plot.
#[derive(Debug, Parser)]
#[command(name = "xyqaoa", version)]
pub struct Cli {
    /// Directory for every file the command writes (created if absent).
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transfer fidelity and final amplitudes of one schedule.
    Simulate(SimulateArgs),
    /// Multi-start optimization of a depth-p schedule; writes JSON.
    Optimize(OptimizeArgs),
    /// Run a grid campaign described by a JSON spec; writes CSV.
    Grid(GridArgs),
    /// Fidelity over a 2-D slice of the control landscape; writes CSV and SVG.
    Landscape(LandscapeArgs),
    /// Lieb-Robinson light-cone bound over a time range; writes CSV.
    LrBound(LrBoundArgs),
    /// Check a schedule against the Pontryagin switching conditions.
    PontryaginCheck(PontryaginArgs),
    /// Least-squares fit of a CSV column pair; writes JSON.
    Fit(FitArgs),
    /// Regenerate SVG figures from the grid CSVs in a directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of chain sites.
    #[arg(long)]
    pub n: usize,
    /// Durations "dB1;dC1;dB2;dC2;..." (empty for no evolution).
    #[arg(long, allow_hyphen_values = true)]
    pub schedule: String,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Number of chain sites.
    #[arg(long)]
    pub n: usize,
    /// Circuit depth (number of (dB, dC) pairs).
    #[arg(long)]
    pub p: usize,
    /// Fix the total runtime; omitted means unconstrained.
    #[arg(long)]
    pub tf: Option<f64>,
    /// Number of random restarts.
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    /// Seed for the restart initial conditions.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Iteration cap per restart.
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Grid spec JSON (label, seed, n_values, p_ranges, tf_ranges, restarts_rule).
    #[arg(long)]
    pub spec: PathBuf,
    /// Keep cells already in the output CSV and run only the missing ones.
    #[arg(long)]
    pub resume: bool,
    /// Override the spec's restart rule for every cell.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Stop after this many new cells (resume later with --resume).
    #[arg(long)]
    pub max_cells: Option<usize>,
    /// Record measured wall time per cell (output no longer byte-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    /// Number of chain sites.
    #[arg(long)]
    pub n: usize,
    /// Base schedule "dB1;dC1;..." supplying the fixed durations.
    #[arg(long)]
    pub schedule: String,
    /// Two 0-based flat indices to vary, e.g. "0,2" (dB1 and dB2).
    #[arg(long)]
    pub vary: String,
    /// Range for the first index, MATLAB style "a:step:b".
    #[arg(long)]
    pub x_range: String,
    /// Range for the second index, MATLAB style "a:step:b".
    #[arg(long)]
    pub y_range: String,
}

#[derive(Debug, Args)]
pub struct LrBoundArgs {
    /// Number of chain sites (distance N - 1).
    #[arg(long)]
    pub n: usize,
    /// Times, MATLAB style "a:step:b".
    #[arg(long)]
    pub t_range: String,
    /// Nearest-neighbour interaction strength.
    #[arg(long, default_value_t = 2.0)]
    pub j: f64,
}

#[derive(Debug, Args)]
pub struct PontryaginArgs {
    /// Number of chain sites.
    #[arg(long)]
    pub n: usize,
    /// Durations "dB1;dC1;dB2;dC2;...".
    #[arg(long)]
    pub schedule: String,
    /// Tolerance on the switching function.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV: a grid CSV or any CSV with a header row.
    #[arg(long)]
    pub csv: PathBuf,
    /// linear, quadratic or inverted_exponential.
    #[arg(long)]
    pub model: String,
    /// Column used as x (default: p for grid CSVs, else the first column).
    #[arg(long)]
    pub x: Option<String>,
    /// Column used as y (default: best_fidelity for grid CSVs, else the second column).
    #[arg(long)]
    pub y: Option<String>,
    /// Keep only grid rows with this N.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding grid CSVs.
    #[arg(long)]
    pub csv_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
