//! `switchseg`: generate, fit, segment, sample, evaluate and benchmark switching models.

mod commands;
mod io;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "switchseg", version, about = "Regime segmentation with hidden Markov switching models")]
pub struct Cli {
    /// Root seed; every random draw in the run derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled series (and reference models) to a directory.
    Generate(GenerateArgs),
    /// Fit a model by EM starting from a model file.
    Fit(FitArgs),
    /// Posterior regime probabilities and their pointwise argmax.
    Smooth(InferArgs),
    /// Jointly most likely regime path.
    Viterbi(InferArgs),
    /// One regime path drawn from the posterior.
    Sample(InferArgs),
    /// Segmentation error of an estimate against true labels, as JSON.
    Eval(EvalArgs),
    /// Wall-time scaling of the duration-count forward pass, as JSON.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Three-regime third-order switching AR with durations uniform on 30..50.
    #[value(name = "sarm-paper")]
    SarmReference,
    /// Two 100-step sinusoid segments with different frequencies.
    Sinusoid,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub model: Preset,
    #[arg(long)]
    pub out: PathBuf,
    /// Regime switches for `sarm-paper`.
    #[arg(long, default_value_t = switchseg::synth::REFERENCE_SWITCHES)]
    pub switches: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Keep the initial distribution and transition matrix fixed.
    #[arg(long)]
    pub fixed_transition: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Relaxed,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterModeArg {
    Collapsed,
    Exact,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One or more series files; several files are processed in parallel.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the start-boundary policy of duration and segmental models.
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    /// Override the filter mode of state-space models.
    #[arg(long, value_enum)]
    pub filter_mode: Option<FilterModeArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// File with the true `regime` column.
    #[arg(long)]
    pub truth: PathBuf,
    /// File with the estimated `regime` column.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Minimize over relabelings of the estimate.
    #[arg(long)]
    pub permute: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 4)]
    pub regimes: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [8, 16, 32, 64, 128])]
    pub d_max: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8, 16])]
    pub regime_sweep: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
