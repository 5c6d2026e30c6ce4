//! The nine pipeline subcommands: argument shapes and execution.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use fraudlab_core::ablation::{app_disjoint_split, run_ablation, write_eval_csv, SplitParams};
use fraudlab_core::analysis::{
    comparative_analysis, write_category_csv, write_hourly_csv, write_rating_csv,
};
use fraudlab_core::config::SimConfig;
use fraudlab_core::features::{
    build_matrix, build_profiles, full_span, parse_matrix_csv, write_matrix_csv, FeatureError,
    FeatureMatrix, FeatureSet, ALL_FEATURE_SETS,
};
use fraudlab_core::labeling::{
    build_labels, class_balance, read_label_set, write_app_status_file, write_labels_file,
    LabelError, LabelParams, LabelSet, SuspicionThreshold,
};
use fraudlab_core::log_model::{
    parse_catalog, parse_log, write_catalog, write_ground_truth, write_log, AppCatalogEntry,
    EventRecord, LogError,
};
use fraudlab_core::metrics::{auc, confusion_metrics, pr_curve, write_pr_csv, MetricsError};
use fraudlab_core::rule_filter::{
    type1_rule_filter, write_filter_csv, FilterParams, DEFAULT_UPDATE_BURST_PER_HOUR,
};
use fraudlab_core::simulator::simulate as run_simulation;
use fraudlab_core::trees::{
    gini_importance, train as train_model, write_importance_csv, Dataset, ImportanceParams,
    ImportanceReport, TrainParams, TreeEnsemble, TreeError,
};

use crate::manifest::{ensure_dir, write_json, RunManifest, StageClock};
use crate::CliError;

fn require_input(path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput { path: path.to_path_buf() });
    }
    if path.is_dir() {
        return Err(CliError::Config {
            message: format!("{} is a directory, expected a file", path.display()),
        });
    }
    Ok(())
}

fn open_reader(path: &Path) -> Result<BufReader<File>, CliError> {
    require_input(path)?;
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Internal { message: format!("open {}: {e}", path.display()) })
}

fn internal(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Internal { message: format!("{context}: {e}") }
}

fn parse_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Parse { path: path.to_path_buf(), message: format!("{}: {e}", path.display()) }
}

fn read_log(path: &Path) -> Result<Vec<EventRecord>, CliError> {
    parse_log(open_reader(path)?).map_err(|e| classify_log_error(path, e))
}

fn read_catalog(path: &Path) -> Result<Vec<AppCatalogEntry>, CliError> {
    parse_catalog(open_reader(path)?).map_err(|e| classify_log_error(path, e))
}

fn classify_log_error(path: &Path, e: LogError) -> CliError {
    match e {
        LogError::Io(io) => internal(&format!("read {}", path.display()), io),
        other => parse_error(path, other),
    }
}

fn classify_label_error(path: &Path, e: LabelError) -> CliError {
    match e {
        LabelError::Io(io) => internal(&format!("read {}", path.display()), io),
        other => parse_error(path, other),
    }
}

fn read_matrix(path: &Path) -> Result<FeatureMatrix, CliError> {
    require_input(path)?;
    let file = File::open(path)
        .map_err(|e| internal(&format!("open {}", path.display()), e))?;
    parse_matrix_csv(file).map_err(|e| match e {
        FeatureError::Io(io) => internal(&format!("read {}", path.display()), io),
        other => parse_error(path, other),
    })
}

/// Rebuilds the label set from a `label` output directory.
fn read_labels_dir(dir: &Path, log: &[EventRecord]) -> Result<LabelSet, CliError> {
    let labels_path = dir.join("labels.csv");
    let status_path = dir.join("app_status.csv");
    require_input(&labels_path)?;
    require_input(&status_path)?;
    read_label_set(&labels_path, &status_path, full_span(log))
        .map_err(|e| classify_label_error(&labels_path, e))
}

/// Data that parses but cannot be trained or scored gets the parse exit code.
fn classify_tree_error(path: &Path, e: TreeError) -> CliError {
    match e {
        TreeError::BadParams { msg } => CliError::Config { message: msg },
        other => parse_error(path, other),
    }
}

fn classify_metrics_error(path: &Path, e: MetricsError) -> CliError {
    parse_error(path, e)
}

fn write_csv_file<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path)
        .map_err(|e| internal(&format!("create {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|()| out.flush())
        .map_err(|e| internal(&format!("write {}", path.display()), e))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// TOML simulator config; omitted fields take their defaults
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    let config = match &args.config {
        Some(path) => {
            require_input(path)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| internal(&format!("read {}", path.display()), e))?;
            let config: SimConfig = toml::from_str(&text)
                .map_err(|e| CliError::Config { message: format!("{}: {e}", path.display()) })?;
            config
        }
        None => SimConfig::default(),
    };
    config
        .validate()
        .map_err(|e| CliError::Config { message: e.to_string() })?;
    clock.lap("config");

    let out = run_simulation(&config)
        .map_err(|e| CliError::Config { message: e.to_string() })?;
    clock.lap("simulate");

    ensure_dir(&args.out)?;
    write_csv_file(&args.out.join("events.csv"), |w| write_log(w, &out.records))?;
    write_csv_file(&args.out.join("catalog.csv"), |w| write_catalog(w, &out.catalog))?;
    write_csv_file(&args.out.join("truth.csv"), |w| write_ground_truth(w, &out.truth))?;
    write_json(&args.out.join("sim_report.json"), &out.report)?;
    let resolved = toml::to_string_pretty(&config)
        .map_err(|e| internal("serialize resolved config", e))?;
    std::fs::write(args.out.join("resolved_config.toml"), resolved)
        .map_err(|e| internal("write resolved_config.toml", e))?;

    let mut manifest = RunManifest::new("simulate", &config)?;
    manifest.seeds.insert("sim", config.seed);
    manifest.inputs = args.config.iter().map(|p| display(p)).collect();
    manifest.outputs = ["events.csv", "catalog.csv", "truth.csv", "sim_report.json", "resolved_config.toml"]
        .map(String::from)
        .to_vec();
    if out.report.warnings.bot_new_app_fallback > 0 {
        manifest
            .warnings
            .push(format!("bot_new_app_fallback={}", out.report.warnings.bot_new_app_fallback));
    }
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    eprintln!(
        "simulate: {} events, {} apps -> {}",
        out.report.total_events,
        out.catalog.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// label

#[derive(Args)]
pub struct LabelArgs {
    /// Event log CSV
    #[arg(long)]
    log: PathBuf,
    /// Suspicion threshold as a decimal fraction, e.g. 0.5
    #[arg(long, default_value = "0.5")]
    threshold: String,
    /// Label the excluded band negative instead of dropping it
    #[arg(long)]
    fold_excluded: bool,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

pub fn label(args: LabelArgs) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    let threshold = SuspicionThreshold::from_decimal_str(&args.threshold)
        .map_err(|e| CliError::Config { message: format!("--threshold: {e}") })?;
    let params = LabelParams { threshold, fold_excluded: args.fold_excluded, ..LabelParams::default() };
    let log = read_log(&args.log)?;
    clock.lap("parse");

    let labels = build_labels(&log, &params);
    let balance = class_balance(&labels);
    clock.lap("label");

    ensure_dir(&args.out)?;
    write_labels_file(&args.out.join("labels.csv"), &labels)
        .map_err(|e| internal("write labels.csv", e))?;
    write_app_status_file(&args.out.join("app_status.csv"), &labels)
        .map_err(|e| internal("write app_status.csv", e))?;

    let mut manifest = RunManifest::new("label", &params)?;
    manifest.inputs = vec![display(&args.log)];
    manifest.outputs = vec!["labels.csv".into(), "app_status.csv".into()];
    if balance.n_pos == 0 || balance.n_neg == 0 {
        manifest.warnings.push(format!(
            "single-class labels: {} positive, {} negative",
            balance.n_pos, balance.n_neg
        ));
    }
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    eprintln!(
        "label: {} positive, {} negative -> {}",
        balance.n_pos,
        balance.n_neg,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// featurize

#[derive(Args)]
pub struct FeaturizeArgs {
    /// Event log CSV
    #[arg(long)]
    log: PathBuf,
    /// App catalog CSV
    #[arg(long)]
    catalog: PathBuf,
    /// Directory holding labels.csv and app_status.csv (the label output)
    #[arg(long)]
    labels: PathBuf,
    /// Feature set to keep: device, app, new, previous, or all
    #[arg(long, default_value = "all")]
    set: String,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct FeaturizeParams<'a> {
    set: &'a str,
}

pub fn featurize(args: FeaturizeArgs) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    let set = FeatureSet::parse(&args.set)
        .map_err(|e| CliError::Config { message: format!("--set: {e}") })?;
    let log = read_log(&args.log)?;
    let catalog = read_catalog(&args.catalog)?;
    let labels = read_labels_dir(&args.labels, &log)?;
    clock.lap("parse");

    let profiles = build_profiles(&log, full_span(&log));
    clock.lap("profiles");
    let matrix = build_matrix(&log, &labels, &profiles, &catalog)
        .map_err(|e| parse_error(&args.log, e))?
        .project(set)
        .map_err(|e| internal("project matrix", e))?;
    clock.lap("featurize");

    ensure_dir(&args.out)?;
    write_csv_file(&args.out.join("matrix.csv"), |w| {
        write_matrix_csv(w, &matrix).map_err(std::io::Error::other)
    })?;

    let mut manifest = RunManifest::new("featurize", &FeaturizeParams { set: &args.set })?;
    manifest.inputs = vec![display(&args.log), display(&args.catalog), display(&args.labels)];
    manifest.outputs = vec!["matrix.csv".into()];
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    eprintln!(
        "featurize: {} rows x {} columns ({}) -> {}",
        matrix.n_rows(),
        matrix.n_cols(),
        args.set,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Args)]
pub struct TrainArgs {
    /// Feature matrix CSV
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    params: TrainParamArgs,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

/// Optional overrides over `TrainParams::default()`.
#[derive(Args)]
pub struct TrainParamArgs {
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    min_child_weight: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    colsample: Option<f64>,
    #[arg(long)]
    lambda_l2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainParamArgs {
    fn resolve(&self) -> TrainParams {
        let d = TrainParams::default();
        TrainParams {
            n_trees: self.n_trees.unwrap_or(d.n_trees),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            min_child_weight: self.min_child_weight.unwrap_or(d.min_child_weight),
            subsample: self.subsample.unwrap_or(d.subsample),
            colsample: self.colsample.unwrap_or(d.colsample),
            lambda_l2: self.lambda_l2.unwrap_or(d.lambda_l2),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    let params = args.params.resolve();
    params
        .validate()
        .map_err(|e| CliError::Config { message: e.to_string() })?;
    let matrix = read_matrix(&args.matrix)?;
    clock.lap("parse");

    let names = matrix.column_names();
    let data = Dataset {
        values: &matrix.values,
        n_cols: matrix.n_cols(),
        labels: &matrix.labels,
        feature_names: &names,
    };
    let model = train_model(&data, &params).map_err(|e| classify_tree_error(&args.matrix, e))?;
    clock.lap("train");

    ensure_dir(&args.out)?;
    let json = model.to_json().map_err(|e| internal("serialize model", e))?;
    std::fs::write(args.out.join("model.json"), json + "\n")
        .map_err(|e| internal("write model.json", e))?;

    let mut manifest = RunManifest::new("train", &params)?;
    manifest.seeds.insert("train", params.seed);
    manifest.inputs = vec![display(&args.matrix)];
    manifest.outputs = vec!["model.json".into()];
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    eprintln!(
        "train: {} trees on {} rows x {} columns -> {}",
        model.trees.len(),
        matrix.n_rows(),
        matrix.n_cols(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Args)]
pub struct EvaluateArgs {
    /// Trained model JSON
    #[arg(long)]
    model: PathBuf,
    /// Feature matrix CSV with the model's columns
    #[arg(long)]
    matrix: PathBuf,
    /// Decision threshold on the predicted probability
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct EvaluateParams {
    threshold: f64,
}

#[derive(Serialize)]
struct EvaluateReport {
    n_rows: usize,
    n_pos: usize,
    n_neg: usize,
    threshold: f64,
    metrics: fraudlab_core::metrics::ConfusionMetrics,
    auc: f64,
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    if !args.threshold.is_finite() {
        return Err(CliError::Config { message: "--threshold must be finite".into() });
    }
    require_input(&args.model)?;
    let model_text = std::fs::read_to_string(&args.model)
        .map_err(|e| internal(&format!("read {}", args.model.display()), e))?;
    let model = TreeEnsemble::from_json(&model_text).map_err(|e| parse_error(&args.model, e))?;
    let matrix = read_matrix(&args.matrix)?;
    clock.lap("parse");

    let names = matrix.column_names();
    if names != model.feature_names {
        return Err(CliError::Config {
            message: format!(
                "model expects columns [{}] but the matrix has [{}]; re-run featurize with the matching --set",
                model.feature_names.join(","),
                names.join(",")
            ),
        });
    }
    let scores = model
        .predict_batch(&matrix.values)
        .map_err(|e| classify_tree_error(&args.matrix, e))?;
    let metrics = confusion_metrics(&scores, &matrix.labels, args.threshold)
        .map_err(|e| classify_metrics_error(&args.matrix, e))?;
    let auc_value = auc(&scores, &matrix.labels)
        .map_err(|e| classify_metrics_error(&args.matrix, e))?;
    let pr = pr_curve(&scores, &matrix.labels)
        .map_err(|e| classify_metrics_error(&args.matrix, e))?;
    clock.lap("evaluate");

    let n_pos = matrix.labels.iter().filter(|y| **y).count();
    let report = EvaluateReport {
        n_rows: matrix.n_rows(),
        n_pos,
        n_neg: matrix.n_rows() - n_pos,
        threshold: args.threshold,
        metrics,
        auc: auc_value,
    };
    ensure_dir(&args.out)?;
    write_json(&args.out.join("eval_report.json"), &report)?;
    write_csv_file(&args.out.join("pr_curve.csv"), |w| write_pr_csv(w, &pr))?;

    let mut manifest = RunManifest::new("evaluate", &EvaluateParams { threshold: args.threshold })?;
    manifest.inputs = vec![display(&args.model), display(&args.matrix)];
    manifest.outputs = vec!["eval_report.json".into(), "pr_curve.csv".into()];
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    eprintln!(
        "evaluate: {} rows, auc {:.4} -> {}",
        report.n_rows,
        report.auc,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ablate

#[derive(Args)]
pub struct AblateArgs {
    /// Event log CSV
    #[arg(long)]
    log: PathBuf,
    /// App catalog CSV
    #[arg(long)]
    catalog: PathBuf,
    /// TOML with optional [split] and [train] sections
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AblateConfig {
    split: SplitParams,
    train: TrainParams,
}

pub fn ablate(args: AblateArgs) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    let config: AblateConfig = match &args.config {
        Some(path) => {
            require_input(path)?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| internal(&format!("read {}", path.display()), e))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config { message: format!("{}: {e}", path.display()) })?
        }
        None => AblateConfig::default(),
    };
    config
        .train
        .validate()
        .map_err(|e| CliError::Config { message: e.to_string() })?;
    let log = read_log(&args.log)?;
    let catalog = read_catalog(&args.catalog)?;
    clock.lap("parse");

    let labels = build_labels(&log, &LabelParams::default());
    let profiles = build_profiles(&log, full_span(&log));
    let matrix = build_matrix(&log, &labels, &profiles, &catalog)
        .map_err(|e| parse_error(&args.log, e))?;
    clock.lap("featurize");

    let (train_m, test_m, split) = app_disjoint_split(&matrix, &config.split)
        .map_err(|e| parse_error(&args.log, e))?;
    let report = run_ablation(&train_m, &test_m, &split, &ALL_FEATURE_SETS, &config.train)
        .map_err(|e| parse_error(&args.log, e))?;
    clock.lap("ablate");

    ensure_dir(&args.out)?;
    write_json(&args.out.join("eval_report.json"), &report)?;
    write_csv_file(&args.out.join("eval_table.csv"), |w| write_eval_csv(w, &report))?;

    let mut manifest = RunManifest::new("ablate", &config)?;
    manifest.seeds.insert("split", config.split.seed);
    manifest.seeds.insert("train", config.train.seed);
    manifest.inputs = vec![display(&args.log), display(&args.catalog)];
    manifest.inputs.extend(args.config.iter().map(|p| display(p)));
    manifest.outputs = vec!["eval_report.json".into(), "eval_table.csv".into()];
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    eprintln!(
        "ablate: {} sets over {} train / {} test rows -> {}",
        report.rows.len(),
        report.split.n_train_rows,
        report.split.n_test_rows,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Event log CSV
    #[arg(long)]
    log: PathBuf,
    /// App catalog CSV
    #[arg(long)]
    catalog: PathBuf,
    /// Directory holding labels.csv and app_status.csv (the label output)
    #[arg(long)]
    labels: PathBuf,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct AnalyzeParams {}

pub fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    let log = read_log(&args.log)?;
    let catalog = read_catalog(&args.catalog)?;
    let labels = read_labels_dir(&args.labels, &log)?;
    clock.lap("parse");

    let report = comparative_analysis(&log, &catalog, &labels)
        .map_err(|e| parse_error(&args.log, e))?;
    clock.lap("analyze");

    ensure_dir(&args.out)?;
    write_json(&args.out.join("analysis_report.json"), &report)?;
    write_csv_file(&args.out.join("category_shares.csv"), |w| write_category_csv(w, &report))?;
    write_csv_file(&args.out.join("rating_hist.csv"), |w| write_rating_csv(w, &report))?;
    write_csv_file(&args.out.join("hourly_hist.csv"), |w| write_hourly_csv(w, &report))?;

    let mut manifest = RunManifest::new("analyze", &AnalyzeParams {})?;
    manifest.inputs = vec![display(&args.log), display(&args.catalog), display(&args.labels)];
    manifest.outputs = [
        "analysis_report.json",
        "category_shares.csv",
        "rating_hist.csv",
        "hourly_hist.csv",
    ]
    .map(String::from)
    .to_vec();
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    eprintln!(
        "analyze: {} categories, {} filter hits -> {}",
        report.category.len(),
        report.filter.total,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// filter-type1

#[derive(Args)]
pub struct FilterType1Args {
    /// Event log CSV
    #[arg(long)]
    log: PathBuf,
    /// Distinct devices updating one app in one hour before it counts as a burst
    #[arg(long, default_value_t = DEFAULT_UPDATE_BURST_PER_HOUR)]
    burst: usize,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

pub fn filter_type1(args: FilterType1Args) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    if args.burst == 0 {
        return Err(CliError::Config { message: "--burst must be at least 1".into() });
    }
    let params = FilterParams { update_burst_per_hour: args.burst };
    let log = read_log(&args.log)?;
    clock.lap("parse");

    let hits = type1_rule_filter(&log, &params);
    clock.lap("filter");

    ensure_dir(&args.out)?;
    write_csv_file(&args.out.join("filter_hits.csv"), |w| write_filter_csv(w, &hits))?;

    let mut manifest = RunManifest::new("filter-type1", &params)?;
    manifest.inputs = vec![display(&args.log)];
    manifest.outputs = vec!["filter_hits.csv".into()];
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    eprintln!("filter-type1: {} hits -> {}", hits.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// importance

#[derive(Args)]
pub struct ImportanceArgs {
    /// Feature matrix CSV
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    n_trees: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(short, long)]
    out: PathBuf,
}

pub fn importance(args: ImportanceArgs) -> Result<(), CliError> {
    let mut clock = StageClock::start();
    let d = ImportanceParams::default();
    let params = ImportanceParams {
        n_trees: args.n_trees.unwrap_or(d.n_trees),
        max_depth: args.max_depth.unwrap_or(d.max_depth),
        seed: args.seed.unwrap_or(d.seed),
    };
    params
        .validate()
        .map_err(|e| CliError::Config { message: e.to_string() })?;
    let matrix = read_matrix(&args.matrix)?;
    clock.lap("parse");

    let names = matrix.column_names();
    let data = Dataset {
        values: &matrix.values,
        n_cols: matrix.n_cols(),
        labels: &matrix.labels,
        feature_names: &names,
    };
    let scores = gini_importance(&data, &params)
        .map_err(|e| classify_tree_error(&args.matrix, e))?;
    let report = ImportanceReport::new(&names, &scores);
    clock.lap("importance");

    ensure_dir(&args.out)?;
    write_csv_file(&args.out.join("importance.csv"), |w| write_importance_csv(w, &report))?;
    write_json(&args.out.join("importance.json"), &report)?;

    let mut manifest = RunManifest::new("importance", &params)?;
    manifest.seeds.insert("importance", params.seed);
    manifest.inputs = vec![display(&args.matrix)];
    manifest.outputs = vec!["importance.csv".into(), "importance.json".into()];
    manifest.write(&args.out)?;
    clock.lap("write");
    clock.write(&args.out)?;
    let top = report.entries.first().map(|e| e.feature.as_str()).unwrap_or("-");
    eprintln!("importance: top feature {} -> {}", top, args.out.display());
    Ok(())
}
