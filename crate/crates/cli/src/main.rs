//! `segrel`: evaluate segmentation predictions for accuracy, calibration and
//! uncertainty quality.
//!
//! Exit codes: 0 success, 2 usage error, 3 load error, 4 internal
//! consistency error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use segrel_core::{ErrorKind, Weights, DEFAULT_NUM_BINS};

mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "segrel",
    version,
    about = "Reliability-aware semantic segmentation evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a dataset and write a JSON metric report.
    Eval(EvalArgs),
    /// Compare a shifted-domain report against a baseline report.
    Compare(CompareArgs),
    /// Write reliability-diagram data as CSV.
    Diagram(DiagramArgs),
    /// Generate a synthetic dataset from a JSON spec.
    Synth(SynthArgs),
    /// Check that every manifest entry loads.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct DatasetArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Override the manifest's ignore index.
    #[arg(long = "ignore-index")]
    ignore_index: Option<u16>,
    /// Divide every pixel's probabilities by their sum before evaluation.
    #[arg(long)]
    renormalize: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Number of equal-width calibration bins.
    #[arg(long, default_value_t = DEFAULT_NUM_BINS, value_parser = parse_bins)]
    bins: usize,
    /// RSS weights for mIoU, ECE, p(acc|cer), p(unc|inacc).
    #[arg(long, default_value = "1,1,1,1", value_parser = parse_weights)]
    weights: Weights,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "SEGREL_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Report destination.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// Run name stored in the report metadata.
    #[arg(long)]
    name: Option<String>,
    /// Also write the component table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write each image's entropy map into this directory.
    #[arg(long = "entropy-dir")]
    entropy_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Report of the in-domain run.
    #[arg(long)]
    baseline: PathBuf,
    /// Report of the shifted run.
    #[arg(long)]
    shifted: PathBuf,
    /// Comparison destination (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagramArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long, default_value_t = DEFAULT_NUM_BINS, value_parser = parse_bins)]
    bins: usize,
    #[arg(long, env = "SEGREL_JOBS", default_value_t = 0)]
    jobs: usize,
    /// CSV destination.
    #[arg(long, default_value = "diagram.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Synthetic dataset spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory; receives manifest.json, predictions/ and labels/.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
}

fn parse_bins(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    s.parse::<Weights>().map_err(|e| e.to_string())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Load => 3,
        ErrorKind::Consistency => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => commands::eval(args),
        Command::Compare(args) => commands::compare(args),
        Command::Diagram(args) => commands::diagram(args),
        Command::Synth(args) => commands::synth(args),
        Command::Validate(args) => commands::validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
