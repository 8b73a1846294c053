//! `filmctl`: gain synthesis, closed-loop simulation and parameter sweeps for
//! falling liquid films.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use filmctl_core::model::ModelKind;

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "FILMCTL_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "filmctl", version, about = "Feedback control of falling liquid films")]
pub struct Cli {
    /// Configuration file (flat TOML); defaults apply to missing keys.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set control.beta=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Benney,
    Wr,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Benney => ModelKind::Benney,
            ModelArg::Wr => ModelKind::WeightedResidual,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise the LQR gain of the design model and write it to a file.
    Gain {
        /// Gain file path (default gain.txt in the output directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fold a weighted-residual gain onto the height alone.
        #[arg(long)]
        reduced: bool,
    },
    /// Spin up a travelling wave, then run the controlled model.
    Simulate {
        /// Use a stored gain instead of synthesising one.
        #[arg(long)]
        gain_file: Option<PathBuf>,
        /// Run without feedback.
        #[arg(long, conflicts_with = "gain_file")]
        uncontrolled: bool,
        /// Time-series CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the linear dispersion relation.
    Dispersion {
        /// Defaults to the design model.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long, default_value_t = 2.0)]
        k_max: f64,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        /// Dispersion CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest actuator count that stabilises each (Re, Ca) of the scan.
    MinActuators {
        /// Cells simulated in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Stability-map CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dimensionless numbers of the shipped fluid presets.
    Preset {
        /// One preset; all of them when omitted.
        name: Option<String>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

fn report(err: &CliError) -> ExitCode {
    let msg = err.message().replace(['\n', '\r'], " ");
    eprintln!("error: class={} message={}", err.class(), msg.trim());
    ExitCode::from(err.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e.to_string().lines().next().unwrap_or("").to_string();
            return report(&CliError::Usage(first.trim_start_matches("error: ").to_string()));
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
