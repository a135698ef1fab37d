mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_150_301;

#[derive(Debug, Parser)]
#[command(name = "navnet", version, about = "GSPN navigation models: solve, simulate, mine and cluster clickstreams")]
pub struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transient measures of the absorbing chain.
    Solve(SolveArgs),
    /// Reachability graph listing or DOT.
    Reach(ReachArgs),
    /// Monte Carlo estimate of visits and occupancy.
    Simulate(SimulateArgs),
    /// Parse an access log into sessions, or estimate rates from it.
    Mine(MineArgs),
    /// Descriptive statistics of a log or a session file.
    Stats(StatsArgs),
    /// Markov-mixture clustering of sessions or label sequences.
    Cluster(ClusterArgs),
    /// Fit enabling sets to target sojourn times.
    FitTopology(FitArgs),
    /// Compare the bundled fixture against its published tables.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureName {
    Kupikniga,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model file.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub model: Option<PathBuf>,
    /// Parameter file. With --fixture it replaces the bundled cluster rates.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Use a bundled model.
    #[arg(long, value_enum)]
    pub fixture: Option<FixtureName>,
    /// Bundled parameter set of the fixture.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub cluster: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    Sojourn,
    Occupancy,
    Visits,
    Cumulative,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Columns to print.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Measure::Sojourn, Measure::Occupancy, Measure::Visits, Measure::Cumulative])]
    pub measures: Vec<Measure>,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Emit Graphviz DOT instead of a listing.
    #[arg(long)]
    pub dot: bool,
    /// Fold vanishing markings away first.
    #[arg(long)]
    pub tangible: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 100_000)]
    pub runs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogKind {
    W3c,
    Csv,
}

#[derive(Debug, Args)]
pub struct LogOptions {
    #[arg(long, value_enum, default_value_t = LogKind::W3c)]
    pub log_format: LogKind,
    /// Field delimiter for csv logs.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Column names, for logs without a #Fields line or header row.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    #[arg(long, default_value = "cs-username")]
    pub user_field: String,
    /// Date column, or the single timestamp column when --time-field is empty.
    #[arg(long, default_value = "date")]
    pub date_field: String,
    #[arg(long, default_value = "time")]
    pub time_field: String,
    #[arg(long, default_value = "cs-uri-stem")]
    pub uri_field: String,
    /// Page table (page, category, place; tab separated). Defaults to the bundled one.
    #[arg(long)]
    pub pages: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub gap_minutes: u32,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// Access log file.
    #[arg(long)]
    pub log: PathBuf,
    #[command(flatten)]
    pub options: LogOptions,
    /// Estimate rates of the model's symbols instead of printing sessions.
    #[arg(long)]
    pub rates: bool,
    /// Model for --rates; defaults to the bundled net.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Place a session ends in, for --rates.
    #[arg(long, default_value = "E")]
    pub end_place: String,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct StatsInput {
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Session file as written by `mine`.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: StatsInput,
    #[command(flatten)]
    pub options: LogOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Alphabet {
    Page,
    Category,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ClusterInput {
    /// Session file as written by `mine`.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// One sequence per line, labels separated by whitespace.
    #[arg(long)]
    pub sequences: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: ClusterInput,
    #[arg(long, value_enum, default_value_t = Alphabet::Category)]
    pub alphabet: Alphabet,
    /// Number of components, or `auto` for BIC selection up to --k-max.
    #[arg(long, default_value = "auto")]
    pub k: String,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    #[arg(long, default_value_t = navnet_core::cluster::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = navnet_core::cluster::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long, default_value_t = navnet_core::cluster::DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// Transitions and start states listed per cluster.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long, default_value_t = navnet_core::cluster::DEFAULT_MIN_PROBABILITY)]
    pub min_prob: f64,
    /// Print the DOT diagram of this cluster (1-based) instead of the report.
    #[arg(long)]
    pub diagram: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Bundled targets and catalogs; the default when --targets is absent.
    #[arg(long, value_enum, conflicts_with = "targets")]
    pub fixture: Option<FixtureName>,
    /// CSV of marking and one target sojourn (s) per parameter file.
    #[arg(long, requires = "params")]
    pub targets: Option<PathBuf>,
    /// Parameter files, one per target column.
    #[arg(long, num_args = 1..)]
    pub params: Vec<PathBuf>,
    /// Symbols every enabling set must contain.
    #[arg(long, value_delimiter = ',')]
    pub require: Vec<String>,
    /// CSV of symbol and the most markings that may enable it.
    #[arg(long)]
    pub caps: Option<PathBuf>,
    /// Largest relative error for an admissible set.
    #[arg(long, default_value_t = 0.02)]
    pub ceiling: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum, default_value_t = FixtureName::Kupikniga)]
    pub fixture: FixtureName,
    /// Cluster to report; both when omitted.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub cluster: Option<u8>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .chain()
                .find_map(|c| c.downcast_ref::<navnet_core::Error>())
                .is_some_and(navnet_core::Error::is_numerical);
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}
