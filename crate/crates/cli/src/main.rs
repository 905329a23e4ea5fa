//! `cirprof`: dataset generation, estimation runs, benchmarks and
//! prediction experiments on synthetic channels.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "cirprof", version, about = "Multipath parameter estimation from channel impulse responses")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// System configuration as JSON; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the dataset or scenario.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-channel work.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Replace existing output files.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset into the output directory.
    Generate {
        /// Dataset recipe as JSON; defaults to the standard NLOS recipe.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        n_channels: Option<usize>,
        #[arg(long)]
        snr_db: Option<f64>,
    },
    /// Estimate every channel of a dataset and write losses and their CDF.
    Estimate {
        #[arg(long)]
        dataset: PathBuf,
        /// peak, nn, profiling or esprit.
        #[arg(long, default_value = "profiling")]
        method: String,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Refine peak or network seeds through all lattice levels.
        #[arg(long)]
        refine: bool,
        #[arg(long, default_value = "standard")]
        schedule: String,
    },
    /// Start estimate plus tracking over a scenario's observation range.
    Track {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "standard")]
        schedule: String,
    },
    /// Latency and accuracy of every method on a dataset.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value = "standard")]
        schedule: String,
    },
    /// Observe a scenario, extrapolate its parameters and score the horizon.
    Predict {
        #[arg(long)]
        scenario: PathBuf,
        /// Inclusive observation range `A..B`, overriding the scenario.
        #[arg(long)]
        observe: Option<String>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Observe the scenario's own parameters instead of estimating them.
        #[arg(long)]
        truth: bool,
        /// natural or not-a-knot.
        #[arg(long, default_value = "natural")]
        boundary: String,
        #[arg(long, default_value = "standard")]
        schedule: String,
    },
    /// Unitary ESPRIT on every channel of a dataset.
    Esprit {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        subarray_length: Option<usize>,
        /// Disable forward-backward averaging.
        #[arg(long)]
        no_fb: bool,
    },
    /// Model order decisions from HOSVD singular values.
    ModelOrder {
        #[arg(long)]
        dataset: PathBuf,
        /// Tensor recipe as JSON.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        floor_db: Option<f64>,
        /// Comma-separated tensor modes (0 antenna, 1 frequency, 2 time).
        #[arg(long, default_value = "0,1,2")]
        modes: String,
        /// Dense classifier bundle; replaces the threshold decision.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
}

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<cirprof::Error> for Failure {
    fn from(e: cirprof::Error) -> Self {
        use cirprof::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) => Failure::Usage(msg),
            E::Domain(_) | E::Format(_) | E::Generation(_) | E::Io(_) | E::Json(_) => Failure::Data(msg),
            E::Numeric(_) | E::Estimation(_) | E::TrackLost(_) => Failure::Numeric(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
