//! `fraudlab`: one binary chaining the pipeline stages over file artifacts.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_MISSING: u8 = 3;
const EXIT_PARSE: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

const EXIT_CODE_HELP: &str = "\
Exit codes:
  0  success
  2  config error: bad flag value, bad config file, or mismatched artifacts
  3  an input file does not exist
  4  an input file is malformed or unusable
  5  internal error

On failure, stderr carries exactly one JSON line:
  {\"error\":\"<kind>\",\"message\":\"...\",\"path\":\"...\"|null}";

fn version_line() -> &'static str {
    let s = format!(
        "{} (formats: log={}, model={}, feature-registry={})",
        env!("CARGO_PKG_VERSION"),
        fraudlab_core::log_model::LOG_FORMAT_VERSION,
        fraudlab_core::trees::MODEL_FORMAT_VERSION,
        fraudlab_core::features::REGISTRY_VERSION,
    );
    Box::leak(s.into_boxed_str())
}

#[derive(Debug)]
pub enum CliError {
    MissingInput { path: PathBuf },
    Parse { path: PathBuf, message: String },
    Config { message: String },
    Internal { message: String },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::MissingInput { .. } => "missing_input",
            CliError::Parse { .. } => "parse_error",
            CliError::Config { .. } => "config_error",
            CliError::Internal { .. } => "internal_error",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingInput { .. } => EXIT_MISSING,
            CliError::Parse { .. } => EXIT_PARSE,
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Internal { .. } => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::MissingInput { path } => format!("input file {} does not exist", path.display()),
            CliError::Parse { message, .. } => message.clone(),
            CliError::Config { message } => message.clone(),
            CliError::Internal { message } => message.clone(),
        }
    }

    fn path(&self) -> Option<&Path> {
        match self {
            CliError::MissingInput { path } | CliError::Parse { path, .. } => Some(path),
            CliError::Config { .. } | CliError::Internal { .. } => None,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "fraudlab",
    version = version_line(),
    about = "Synthetic app-market download-fraud lab: simulate, label, featurize, train, evaluate",
    after_help = EXIT_CODE_HELP
)]
struct Cli {
    /// Cap internal parallelism at N threads (0 = library default).
    /// Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic market event log, catalog, and ground truth
    Simulate(commands::SimulateArgs),
    /// Label downloads per app from the vendor flag
    Label(commands::LabelArgs),
    /// Extract the feature matrix for labeled downloads
    Featurize(commands::FeaturizeArgs),
    /// Train a boosted-tree classifier on a matrix
    Train(commands::TrainArgs),
    /// Score a matrix with a trained model and report metrics
    Evaluate(commands::EvaluateArgs),
    /// Train and score every feature set on an app-disjoint split
    Ablate(commands::AblateArgs),
    /// Contrast suspicious vs normal category/rating/hourly distributions
    Analyze(commands::AnalyzeArgs),
    /// Flag farm-signature records with deterministic source/device rules
    FilterType1(commands::FilterType1Args),
    /// Rank features by randomized-forest Gini importance
    Importance(commands::ImportanceArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Config { message: format!("thread pool: {e}") })?;
    }
    match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Label(args) => commands::label(args),
        Command::Featurize(args) => commands::featurize(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Ablate(args) => commands::ablate(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::FilterType1(args) => commands::filter_type1(args),
        Command::Importance(args) => commands::importance(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": e.kind(),
                "message": e.message(),
                "path": e.path().map(|p| p.display().to_string()),
            });
            eprintln!("{line}");
            ExitCode::from(e.exit_code())
        }
    }
}
