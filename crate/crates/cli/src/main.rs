//! `rnsim`: experiments and utilities for the RNS analog core simulator.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_list, parse_u32_list, ConfigFile};

/// Failure classes and their exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Exit 2: invalid configuration or arguments.
    Config(String),
    /// Exit 3: reading or writing files.
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Io(m) => f.write_str(m),
        }
    }
}

impl From<rns_analog::Error> for Failure {
    fn from(e: rns_analog::Error) -> Self {
        use rns_analog::Error;
        match e {
            Error::Io(_) | Error::TensorFile(_) => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rnsim", version, about = "Bit-accurate RNS analog GEMM simulator")]
pub struct Cli {
    /// TOML config file with one section per subcommand.
    #[arg(long, global = true, env = "RNSIM_CONFIG")]
    pub config: Option<PathBuf>,

    /// Override a config value of the active subcommand, e.g. `--set trials=100`.
    /// Applied after the config file and before typed flags.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// CSV output path (`-` for stdout). Defaults to `<subcommand>.csv`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Also write the effective config as TOML to this path.
    #[arg(long, global = true)]
    pub snapshot: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Show the residues of an integer and its reconstruction.
    Convert(ConvertArgs),
    /// Dot-product error of the RNS and fixed-point cores.
    DotprodError(DotprodArgs),
    /// Toy-model accuracy over precision and tile size.
    Accuracy(AccuracyArgs),
    /// Toy-model accuracy under residue noise with RRNS voting and retries.
    NoiseSweep(NoiseArgs),
    /// Analytic and simulated RRNS output error probability with retries.
    RrnsPerr(PerrArgs),
    /// Per-element DAC and ADC energy of both cores.
    Energy(EnergyArgs),
    /// Run the toy model (or a manifest) on a test set.
    Infer(InferArgs),
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct ConvertArgs {
    /// Integer to convert; negative values use the signed encoding.
    pub value: i64,
    /// Comma-separated moduli.
    #[arg(long, value_parser = parse_list::<u64>, conflicts_with = "preset")]
    pub moduli: Option<::std::vec::Vec<u64>>,
    /// Named moduli preset (rns4 .. rns8).
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Args, Debug)]
pub struct DotprodArgs {
    /// Operand bit widths, e.g. `4..8` or `4,6`.
    #[arg(long = "b", value_parser = parse_u32_list)]
    pub bits: Option<::std::vec::Vec<u32>>,
    /// Vector length (one tile).
    #[arg(long)]
    pub h: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Seed (default 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Histogram bins per core and width.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Histogram CSV path (not written unless given).
    #[arg(long)]
    pub histogram: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AccuracyArgs {
    #[arg(long = "b", value_parser = parse_u32_list)]
    pub bits: Option<::std::vec::Vec<u32>>,
    /// Tile sizes, e.g. `16,64,128`.
    #[arg(long, value_parser = parse_list::<u64>)]
    pub h: Option<::std::vec::Vec<u64>>,
    /// Cores: `rns`, `fixed_point`.
    #[arg(long, value_parser = parse_list::<String>)]
    pub modes: Option<::std::vec::Vec<String>>,
    /// One evaluation per seed; each picks its own test subset (default 1,2,3).
    #[arg(long, value_parser = parse_list::<u64>)]
    pub seeds: Option<::std::vec::Vec<u64>>,
    /// Test samples per seed.
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[arg(long = "b")]
    pub bits: Option<u32>,
    #[arg(long)]
    pub h: Option<u64>,
    /// Non-redundant moduli (default: preset for `b`).
    #[arg(long, value_parser = parse_list::<u64>)]
    pub moduli: Option<::std::vec::Vec<u64>>,
    /// Redundant moduli.
    #[arg(long, value_parser = parse_list::<u64>)]
    pub redundant: Option<::std::vec::Vec<u64>>,
    /// Numbers of redundant moduli to sweep, e.g. `0,1,2`.
    #[arg(long, value_parser = parse_list::<u64>)]
    pub redundancy: Option<::std::vec::Vec<u64>>,
    /// Residue error probabilities.
    #[arg(long, value_parser = parse_list::<f64>)]
    pub p: Option<::std::vec::Vec<f64>>,
    /// Attempt budgets R.
    #[arg(long, value_parser = parse_list::<u64>)]
    pub attempts: Option<::std::vec::Vec<u64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Monte Carlo trials per analytic p_err value.
    #[arg(long)]
    pub rate_trials: Option<u64>,
    /// Cutoff CSV path (not written unless given).
    #[arg(long)]
    pub cutoffs: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PerrArgs {
    /// Code moduli; the `k` smallest are non-redundant.
    #[arg(long, value_parser = parse_list::<u64>, conflicts_with = "preset")]
    pub moduli: Option<::std::vec::Vec<u64>>,
    /// Named preset used as the code moduli.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub k: Option<u64>,
    #[arg(long, value_parser = parse_list::<f64>)]
    pub p: Option<::std::vec::Vec<f64>>,
    #[arg(long, value_parser = parse_list::<u64>)]
    pub attempts: Option<::std::vec::Vec<u64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exact enumeration of the single-attempt rates when feasible.
    #[arg(long)]
    pub exact: Option<bool>,
}

#[derive(Args, Debug)]
pub struct EnergyArgs {
    /// Only the width of this preset (rns4 .. rns8).
    #[arg(long, conflicts_with = "bits")]
    pub preset: Option<String>,
    #[arg(long = "b", value_parser = parse_u32_list)]
    pub bits: Option<::std::vec::Vec<u32>>,
    #[arg(long)]
    pub h: Option<u64>,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Model manifest (default: bundled digits MLP).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Test set TensorFile with `x` and `labels` (default: bundled digits).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// `float`, `rns`, `fixed_point` or `rrns`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long = "b")]
    pub bits: Option<u32>,
    #[arg(long)]
    pub h: Option<u64>,
    /// Fixed-point ADC bits (default `b`).
    #[arg(long)]
    pub b_adc: Option<u32>,
    #[arg(long, value_parser = parse_list::<u64>)]
    pub moduli: Option<::std::vec::Vec<u64>>,
    #[arg(long, value_parser = parse_list::<u64>)]
    pub redundant: Option<::std::vec::Vec<u64>>,
    #[arg(long)]
    pub attempts: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Samples to run (0 = all).
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let pool = match cli.jobs {
        Some(0) => return Err(Failure::Config("--jobs must be at least 1".into())),
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Failure::Config(e.to_string()))?,
        ),
        None => None,
    };
    match pool {
        Some(p) => p.install(|| commands::dispatch(&cli, &file)),
        None => commands::dispatch(&cli, &file),
    }
}
