mod bench;
mod estimate;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Format;

/// Top income shares from grouped tax tabulations.
#[derive(Debug, Parser)]
#[command(name = "topshares", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate top-fractile shares for every year in a tabulation file.
    Estimate(EstimateArgs),
    /// Bracket counts and the distance between each fractile and its reference bracket.
    Diagnostics(DiagnosticsArgs),
    /// Run the synthetic accuracy benchmark.
    Synth(SynthArgs),
    /// Score both estimators against a user-supplied micro sample.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodChoice {
    Pi,
    Me,
    Both,
}

#[derive(Debug, Args)]
struct TabulationInput {
    /// Bracket CSV: year,lower_threshold,returns,income_sum.
    #[arg(long)]
    input: PathBuf,
    /// Denominator CSV: year,population,total_income,income_unit.
    #[arg(long)]
    denominators: PathBuf,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: TabulationInput,
    #[arg(long, value_enum, default_value_t = MethodChoice::Both)]
    method: MethodChoice,
    /// Comma-separated top fractiles, strictly decreasing.
    #[arg(long, default_value = output::DEFAULT_FRACTILES)]
    fractiles: String,
    /// Report Pareto interpolation above the highest tabulated bracket instead of a marker.
    #[arg(long)]
    allow_extrapolation: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct DiagnosticsArgs {
    #[command(flatten)]
    input: TabulationInput,
    #[arg(long, default_value = output::DEFAULT_FRACTILES)]
    fractiles: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Benchmark spec as JSON; built-in defaults otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated bracket counts.
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    fractiles: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Micro-sample CSV: income,weight.
    #[arg(long)]
    micro: PathBuf,
    /// Tax units without a return, counted in the population with zero income.
    #[arg(long, default_value_t = 0)]
    nonfilers: u64,
    #[arg(long, default_value = "8,14,20,30")]
    classes: String,
    #[arg(long, default_value = output::DEFAULT_FRACTILES)]
    fractiles: String,
    #[command(flatten)]
    output: OutputArgs,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Complete,
    Partial,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Estimate(args) => estimate::estimate(&args),
        Command::Diagnostics(args) => estimate::diagnostics(&args),
        Command::Synth(args) => bench::synth(&args),
        Command::Compare(args) => bench::compare(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
