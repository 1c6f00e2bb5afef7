//! The `fedsketch` command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
//! 4 a verification check failed, 1 anything else.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_partition, cmd_report, cmd_run, cmd_synth, cmd_verify, RunArtifacts, VerifyOptions};
pub use config::ExperimentConfig;

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ASSERTION: i32 = 4;

/// Federated extreme multi-label simulation with label hashing.
#[derive(Debug, Parser)]
#[command(name = "fedsketch", version)]
pub struct Cli {
    /// Configuration file (`section.key=value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base seed; overrides the configuration's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory (run, verify) or file (synth, partition, report).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "FEDSKETCH_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a federated experiment and write history.csv and summary.txt.
    Run(RunArgs),
    /// Run verification suites and write their reports.
    Verify(VerifyArgs),
    /// Generate a synthetic power-law dataset.
    Synth(SynthArgs),
    /// Split a dataset across clients.
    Partition(PartitionArgs),
    /// Compare finished runs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Extra `section.key=value` overrides applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lemma1,
    Lemma2,
    Theorem3,
    Mse,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub suite: Suite,
    /// Number of classes.
    #[arg(long)]
    pub p: Option<usize>,
    /// Buckets per table.
    #[arg(long = "B")]
    pub buckets: Option<usize>,
    /// Number of tables.
    #[arg(long = "R")]
    pub tables: Option<usize>,
    /// Failure probability for the table-size check.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Monte-Carlo trials.
    #[arg(long)]
    pub trials: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub zipf: Option<f64>,
    #[arg(long)]
    pub features_per_class: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub labels_per_sample: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// Dataset in the XC text format.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of clients K.
    #[arg(long)]
    pub clients: usize,
    /// Number of frequent classes F; defaults to those covering 30% of
    /// label events.
    #[arg(long)]
    pub frequent: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run output directories, each holding a summary.txt.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Run to compare against; defaults to the first FedAvg run.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Input(_) | Error::Shape(_) | Error::Format { .. } | Error::Io { .. } => EXIT_DATA,
        Error::Domain(_) => EXIT_OTHER,
    }
}

/// Parse arguments, execute, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
