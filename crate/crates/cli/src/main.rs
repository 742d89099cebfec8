mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use abstain::kernel::KernelSpec;
use abstain::SurrogateKind;
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] abstain::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// A requested check ran but did not pass.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Surrogate {
    Cs,
    Ova,
    Bep,
}

impl From<Surrogate> for SurrogateKind {
    fn from(s: Surrogate) -> Self {
        match s {
            Surrogate::Cs => SurrogateKind::Cs,
            Surrogate::Ova => SurrogateKind::Ova,
            Surrogate::Bep => SurrogateKind::Bep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kernel {
    Linear,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Simplex,
    Scores,
}

#[derive(Debug, Parser)]
#[command(name = "abstain", version, about = "Multiclass classification with a reject option")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train/test files and a prototypes sidecar.
    Synth,
    /// Train a kernel model and save it as JSON.
    Train,
    /// Predict labels (or reject) for a data file.
    Predict,
    /// Report abstain risk, error and reject rates.
    Eval,
    /// Risk curves over training sizes and thresholds.
    Sweep,
    /// Sample the excess-risk bounds and the lemma identities.
    Verify,
    /// Emit partition tables for the simplex or the score plane.
    Partition,
    /// Pick the threshold that meets a reject-rate target.
    Calibrate,
}

/// Flat flag namespace shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct RunConfig {
    /// `key = value` settings file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, visible_alias = "kind", global = true, value_enum)]
    pub surrogate: Option<Surrogate>,
    /// Rejection cost.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub alpha: f64,
    /// Decision threshold.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, global = true, value_enum, default_value_t = Kernel::Gaussian)]
    pub kernel: Kernel,
    /// Gaussian kernel width: `k(x, x') = exp(-γ ||x - x'||²)`.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "in", global = true, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    pub model: Option<PathBuf>,
    #[arg(long, global = true)]
    pub target_reject: Option<f64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Comma-separated training sizes.
    #[arg(long, global = true, value_delimiter = ',')]
    pub m_grid: Option<Vec<usize>>,
    /// Comma-separated thresholds.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub tau_grid: Option<Vec<f64>>,
    #[arg(long, global = true, default_value_t = 12_800)]
    pub m_train: usize,
    #[arg(long, global = true, default_value_t = 10_000)]
    pub m_test: usize,
    /// Number of classes (synthetic data and bound checks).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Synthetic noise scale.
    #[arg(long, global = true, default_value_t = 0.65)]
    pub sigma: f64,
    /// Subgradient steps (CS, and any surrogate with alpha != 1/2).
    #[arg(long, global = true, default_value_t = 2000)]
    pub steps: usize,
    /// Subgradient minibatch size; full batch when absent.
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub max_epochs: usize,
    /// Relative duality-gap target for the BEP dual solver.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub gap_tol: f64,
    /// Share of the evaluation file used to calibrate the threshold.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub calib_fraction: f64,
    #[arg(long, global = true, value_enum, default_value_t = Figure::Simplex)]
    pub figure: Figure,
    /// Grid steps per edge (simplex) or points per axis (scores).
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Half-width of the score-plane grid.
    #[arg(long, global = true, default_value_t = 2.0)]
    pub range: f64,
}

impl RunConfig {
    pub fn kind(&self) -> SurrogateKind {
        self.surrogate.unwrap_or(Surrogate::Bep).into()
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec, CliError> {
        Ok(match self.kernel {
            Kernel::Linear => KernelSpec::linear(),
            Kernel::Gaussian => KernelSpec::gaussian(self.gamma)?,
        })
    }
}

fn run() -> Result<(), CliError> {
    let args = config::expand_args(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(CliError::Usage(e.render().to_string())),
        Err(e) => {
            e.exit();
        }
    };
    commands::dispatch(&cli.command, &cli.run)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed the pipe (e.g. `| head`)
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            let msg = msg.trim_end();
            if msg.starts_with("error:") {
                eprintln!("{msg}");
            } else {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
