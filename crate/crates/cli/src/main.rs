mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "ecpd", version, about = "Energy-statistic change-point detection for weekly excess mortality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute excess deaths and rates from raw weekly counts.
    Excess(ExcessArgs),
    /// Run divisive change-point detection.
    Detect(DetectArgs),
    /// Emit tidy plot-ready data (week, group, rate, cluster_id) for reports.
    Report(ReportArgs),
    /// Generate a piecewise synthetic series with a truth sidecar.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RawArgs {
    /// Keep only rows with this country code (multi-country files).
    #[arg(long)]
    pub country: Option<String>,
    /// Baseline years as `FROM-TO` or a comma list.
    #[arg(long, default_value = "2015-2019")]
    pub baseline_years: String,
    /// Emit an empty rate where the baseline median is zero instead of failing.
    #[arg(long)]
    pub null_rate: bool,
}

#[derive(Debug, Args)]
pub struct ExcessArgs {
    /// Weekly deaths table in STMF layout.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub raw: RawArgs,
    /// First week (YYYY-Www); defaults to the first week in the data.
    #[arg(long)]
    pub start: Option<String>,
    /// Last week (YYYY-Www); defaults to the last week in the data.
    #[arg(long)]
    pub end: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    /// All ten sex x age-group rates.
    All,
    /// One run per age group on its (female, male) rate pair.
    PerAgeGroup,
    /// Total excess rate across all groups.
    Totals,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "from_raw", "series"])))]
pub struct DetectArgs {
    /// Excess-series CSV written by `ecpd excess`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Raw STMF weekly deaths; the excess series is computed first.
    #[arg(long)]
    pub from_raw: Option<PathBuf>,
    /// Wide series CSV (time_label, then one column per dimension).
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[command(flatten)]
    pub raw: RawArgs,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
    #[arg(long, default_value_t = 499)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sig: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub max_points: Option<usize>,
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub end: Option<String>,
    #[arg(long, value_enum, default_value_t = GroupingArg::All)]
    pub grouping: GroupingArg,
    /// Restrict `per-age-group` to one age group (0_14, 15_64, 65_74, 75_84, 85p).
    #[arg(long)]
    pub age_group: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file; a directory for `--grouping per-age-group` without `--age-group`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("data").required(true).args(["excess", "series"])))]
pub struct ReportArgs {
    /// Detection JSON report(s).
    #[arg(long = "report", required = true)]
    pub reports: Vec<PathBuf>,
    /// Excess-series CSV the reports were computed from.
    #[arg(long)]
    pub excess: Option<PathBuf>,
    /// Wide series CSV the report was computed from.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Output file for one report, directory for several.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Comma-separated segments `LENGTH:MEAN[:SCALE]`, e.g. `50:0,50:3`.
    #[arg(long)]
    pub segments: String,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Student-t degrees of freedom (>= 3) for heavy-tailed noise.
    #[arg(long)]
    pub df: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Series CSV path; the truth is written next to it as `<output>.truth.json`.
    #[arg(long)]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Excess(args) => commands::cmd_excess(&args),
        Command::Detect(args) => commands::cmd_detect(&args),
        Command::Report(args) => commands::cmd_report(&args),
        Command::Simulate(args) => commands::cmd_simulate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(match err {
                CliError::Input(_) => 2,
                CliError::Degenerate(_) => 3,
                CliError::Inconsistent(_) => 4,
            })
        }
    }
}
