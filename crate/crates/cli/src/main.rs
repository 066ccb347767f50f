//! `qcs`: experiment runner for quantum compressive sensing.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcs::noise::NoiseKind;
use qcs::qite::Tomography;

#[derive(Debug, Parser)]
#[command(name = "qcs", version, about = "Quantum compressive sensing experiments")]
pub struct Cli {
    /// Master seed; every command is deterministic under it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (0 picks the number of cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Output path: a directory for gen-data, a CSV file otherwise (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Leave out the leading timestamp comment in CSV output.
    #[arg(long, global = true)]
    pub no_banner: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, clean, normalize and split a synthetic LIDAR dataset.
    GenData(GenDataArgs),
    /// Training fidelity versus subset size, or versus noise with --noise.
    Train(TrainArgs),
    /// QITE energy trajectories for a Pauli Hamiltonian.
    Qite(QiteArgs),
    /// Sense, project, sample and score test signals.
    Reconstruct(ReconstructArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Number of raw samples to generate.
    #[arg(long, default_value_t = qcs::dataio::DEFAULT_N_SAMPLES)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory written by gen-data.
    #[arg(long, default_value = "data")]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Subset sizes for the size sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64, 128, 256, 512, 1024])]
    pub sizes: Vec<usize>,

    /// Disjoint subsets per size.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,

    /// Most training samples folded into the reference state.
    #[arg(long, default_value_t = 1 << 14)]
    pub global_cap: usize,

    /// Run the noise sweep over these channels instead of the size sweep.
    #[arg(long, value_delimiter = ',')]
    pub noise: Vec<NoiseKind>,

    /// Noise strengths for the noise sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2])]
    pub probs: Vec<f64>,

    /// Training subset size for the noise sweep.
    #[arg(long, default_value_t = 256)]
    pub subset_size: usize,

    /// Trajectories averaged per noisy machine.
    #[arg(long, default_value_t = 5000)]
    pub trajectories: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Initial {
    /// Uniform superposition.
    Plus,
    /// All qubits in |0>.
    Zero,
    /// Quantum average of a train subset (needs --data).
    Born,
}

#[derive(Debug, Args)]
pub struct QiteArgs {
    /// Whitespace separated signed Pauli words, e.g. "-ZII -IIZ".
    #[arg(long, allow_hyphen_values = true)]
    pub hamiltonian: String,

    #[arg(long, default_value_t = 0.05)]
    pub dbeta: f64,

    #[arg(long, default_value_t = 3.0)]
    pub beta: f64,

    /// Shots per observable, or "exact".
    #[arg(long, default_value = "exact")]
    pub shots: Tomography,

    #[arg(long, default_value_t = qcs::qite::DEFAULT_MAX_DISCARDS)]
    pub max_discards: usize,

    /// Qubits in each fitted unitary's domain (default: whole register, capped).
    #[arg(long)]
    pub domain: Option<usize>,

    #[arg(long, default_value = "none")]
    pub noise_kind: NoiseKind,

    #[arg(long, default_value_t = 0.0)]
    pub noise_prob: f64,

    /// Noisy trajectories, or independent runs when noiseless.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,

    #[arg(long, value_enum, default_value_t = Initial::Plus)]
    pub initial: Initial,

    /// Dataset directory for --initial born.
    #[arg(long, default_value = "data")]
    pub data: PathBuf,

    /// Subset size for --initial born.
    #[arg(long, default_value_t = 256)]
    pub train_size: usize,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, default_value_t = 256)]
    pub train_size: usize,

    #[arg(long, default_value_t = 64)]
    pub test_size: usize,

    /// Numbers of classically measured pixels.
    #[arg(long = "n-c", value_delimiter = ',', default_values_t = [2usize, 3, 4])]
    pub n_c: Vec<usize>,

    /// Channel for the noisy runs (the noiseless run is always included).
    #[arg(long, default_value = "none")]
    pub noise_kind: NoiseKind,

    #[arg(long, value_delimiter = ',')]
    pub noise_probs: Vec<f64>,

    /// Samples drawn from each projected machine.
    #[arg(long, default_value_t = qcs::pipeline::DEFAULT_SAMPLES)]
    pub samples: u64,

    #[arg(long, default_value_t = qcs::pipeline::DEFAULT_TRAJECTORIES)]
    pub trajectories: usize,

    #[arg(long, default_value_t = 0.05)]
    pub dbeta: f64,

    #[arg(long, default_value_t = 3.0)]
    pub beta: f64,

    /// Re-run training and projection for every sample, as hardware must.
    #[arg(long)]
    pub hardware_faithful: bool,

    /// Project onto the measured real values instead of their bits.
    #[arg(long)]
    pub gaussian: bool,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<qcs::QcsError> for CliError {
    fn from(e: qcs::QcsError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "failed: {m}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("qcs: {e}");
            return ExitCode::from(3);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qcs: {e}");
            ExitCode::from(e.code())
        }
    }
}
