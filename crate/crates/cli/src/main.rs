//! `dspace`: sample, simulate, classify, identify and analyze a design space
//! described by a problem file.

mod artifacts;
mod cache;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dspace::analysis::AnalysisError;
use dspace::dsid::DsidError;

/// Exit status for each failure class.
pub mod exit {
    pub const GENERIC: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const CONFIG: u8 = 3;
    pub const MODEL_FAILURES: u8 = 4;
    pub const NO_UNIFIED_SHAPE: u8 = 5;
    pub const NOP_OUTSIDE_SPACE: u8 = 6;
}

#[derive(Debug, Parser)]
#[command(
    name = "dspace",
    version,
    about = "Design space identification and flexibility analysis"
)]
pub struct Cli {
    /// Problem definition (JSON).
    #[arg(long, global = true)]
    pub problem: Option<PathBuf>,
    /// Directory for all artifacts.
    #[arg(long, global = true, default_value = "dspace-out")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for model evaluation (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Re-simulate a random share of surrogate-labeled extra points.
    #[arg(long, global = true)]
    pub verify_extras: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Tolerance,
    Rs,
    Comb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpolatorArg {
    /// Neural network (trained or loaded from the surrogate file).
    Mlp,
    /// Piecewise-linear over the triangulated knowledge space.
    Linear,
    /// The process model itself.
    Model,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write Sobol samples of the decision space to samples.csv.
    Sample {
        /// Number of samples as a power of two (default: the problem's).
        #[arg(long)]
        power: Option<u32>,
    },
    /// Evaluate the model on the samples and write the labeled cloud.
    Run {
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Largest tolerated share of failed evaluations (percent).
        #[arg(long, default_value_t = 10.0)]
        max_failure_pct: f64,
    },
    /// Train the neural-network surrogate on the labeled cloud.
    TrainSurrogate {
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Comma-separated hidden layer widths.
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Identify the design space with one of the three methods.
    Identify {
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        cloud: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = InterpolatorArg::Mlp)]
        interpolator: InterpolatorArg,
        /// Trained surrogate; trained and saved when missing.
        #[arg(long)]
        surrogate: Option<PathBuf>,
        /// Violation tolerance of the combinatorial method (percent).
        #[arg(long)]
        v_max: Option<f64>,
    },
    /// Acceptable operating region around a nominal operating point.
    Aor {
        /// Comma-separated decision values.
        #[arg(long, value_delimiter = ',', required = true)]
        nop: Vec<f64>,
        #[arg(long)]
        dsp: Option<PathBuf>,
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Compare the AORs of two nominal operating points.
    Compare {
        #[arg(long, value_delimiter = ',', required = true)]
        nop_a: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        nop_b: Vec<f64>,
        #[arg(long)]
        dsp: Option<PathBuf>,
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Collect all JSON and CSV artifacts with a manifest.
    Report,
}

/// Failure that maps to a specific exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{failed} of {total} model evaluations failed (limit {limit}%)")]
    ModelFailures {
        failed: usize,
        total: usize,
        limit: f64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Config(_) => exit::CONFIG,
                CliError::ModelFailures { .. } => exit::MODEL_FAILURES,
            };
        }
        if let Some(e) = cause.downcast_ref::<DsidError>() {
            return match e {
                DsidError::NoUnifiedShape(_) => exit::NO_UNIFIED_SHAPE,
                DsidError::InvalidProblem(_)
                | DsidError::MissingKpi(_)
                | DsidError::InvalidBounds(_)
                | DsidError::InterpolatorMismatch { .. } => exit::CONFIG,
                _ => exit::GENERIC,
            };
        }
        if let Some(AnalysisError::NopOutsideSpace(_)) = cause.downcast_ref::<AnalysisError>() {
            return exit::NOP_OUTSIDE_SPACE;
        }
        if cause.downcast_ref::<dspace::model::ModelError>().is_some()
            || cause
                .downcast_ref::<dspace::sampling::SamplingError>()
                .is_some()
        {
            return exit::CONFIG;
        }
    }
    exit::GENERIC
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
