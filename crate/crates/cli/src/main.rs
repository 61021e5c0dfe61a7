mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::InvalidInput;

/// Schema-guided dialogue toolkit: validate schemas, simulate corpora,
/// track and score dialogue state, and compute corpus statistics.
#[derive(Debug, Parser)]
#[command(name = "sgd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate one or more schema files or directories holding schema.json.
    SchemaValidate(SchemaValidateArgs),
    /// Generate an annotated dialogue corpus.
    Simulate(SimulateArgs),
    /// Produce hypothesis states for a corpus.
    Track(TrackArgs),
    /// Score hypotheses against a reference corpus.
    Evaluate(EvaluateArgs),
    /// Compute corpus statistics and histogram tables.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct SchemaValidateArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Directory for schema_report.json and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept unknown fields with a warning.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    schemas: PathBuf,
    /// Directory of <Service>.csv entity tables.
    #[arg(long)]
    entities: PathBuf,
    #[arg(long)]
    num: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Automaton TOML; defaults to the bundled one.
    #[arg(long)]
    automaton: Option<PathBuf>,
    /// Template TOML; defaults to the bundled one.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Dialogues allowed per delexicalized flow.
    #[arg(long, default_value_t = 1)]
    duplicate_quota: usize,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schemas: PathBuf,
    /// Entity tables used to spot open values in utterances.
    #[arg(long)]
    entities: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Copy reference states instead of tracking.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "hyp")]
    hypothesis: PathBuf,
    #[arg(long)]
    schemas: PathBuf,
    /// Newline-delimited service names counted as SEEN.
    #[arg(long)]
    seen_services: Option<PathBuf>,
    /// Directory for report.json and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schemas: PathBuf,
    #[arg(long)]
    seen_services: Option<PathBuf>,
    /// JSON object mapping service names to domains.
    #[arg(long)]
    domains: Option<PathBuf>,
    /// Report path; histogram CSVs are written beside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lenient: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SchemaValidate(a) => commands::schema_validate(a).map(|ok| if ok { 0 } else { 1 }),
        Command::Simulate(a) => commands::simulate(a).map(|()| 0),
        Command::Track(a) => commands::track(a).map(|()| 0),
        Command::Evaluate(a) => commands::run_evaluate(a).map(|()| 0),
        Command::Stats(a) => commands::stats(a).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<InvalidInput>() { 1 } else { 2 })
        }
    }
}
