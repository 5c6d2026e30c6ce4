//! Feature-set ablation over an app-disjoint train/test split.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{select_features, FeatureMatrix, FeatureSet, FEATURES};
use crate::labeling::ClassBalance;
use crate::metrics::{auc, confusion_metrics, pr_curve, ConfusionMetrics, MetricsError, PrPoint};
use crate::rng::{stream_rng, Stream};
use crate::trees::{train, Dataset, TrainParams, TreeError};

#[derive(Debug, Error)]
pub enum AblationError {
    #[error("matrix has no app ids; rebuild it from a log instead of a csv without them")]
    AppIdsMissing,
    #[error("train fraction {0} is outside (0, 1)")]
    BadTrainFraction(f64),
    #[error("split left the {side} side empty")]
    DegenerateSplit { side: &'static str },
    #[error("app {app_id} appears on both sides of the split")]
    LeakedApp { app_id: String },
    #[error("ablation needs the full feature matrix, found a column subset")]
    NotFullWidth,
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitParams {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams { train_fraction: 0.7, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDescription {
    pub seed: u64,
    pub train_fraction_target: f64,
    pub train_row_fraction: f64,
    pub n_train_rows: usize,
    pub n_test_rows: usize,
    pub n_train_apps: usize,
    pub n_test_apps: usize,
}

/// Splits rows so no app lands on both sides: whole apps, in seeded shuffle
/// order, go to the train side until it holds at least the target fraction of
/// rows. Grouping by app is what keeps per-app label leakage out of the test
/// side.
pub fn app_disjoint_split(
    matrix: &FeatureMatrix,
    params: &SplitParams,
) -> Result<(FeatureMatrix, FeatureMatrix, SplitDescription), AblationError> {
    if !(params.train_fraction > 0.0 && params.train_fraction < 1.0) {
        return Err(AblationError::BadTrainFraction(params.train_fraction));
    }
    let app_ids = matrix.app_ids.as_ref().ok_or(AblationError::AppIdsMissing)?;
    if matrix.n_rows() == 0 {
        return Err(AblationError::DegenerateSplit { side: "train" });
    }

    let mut rows_per_app: HashMap<&str, usize> = HashMap::new();
    for app in app_ids {
        *rows_per_app.entry(app.as_str()).or_default() += 1;
    }
    let mut apps: Vec<&str> = rows_per_app.keys().copied().collect();
    apps.sort_unstable();
    let mut rng = stream_rng(params.seed, Stream::Split);
    apps.shuffle(&mut rng);

    let goal = params.train_fraction * matrix.n_rows() as f64;
    let mut train_apps: BTreeSet<&str> = BTreeSet::new();
    let mut train_rows = 0usize;
    for app in &apps {
        if (train_rows as f64) < goal {
            train_rows += rows_per_app[app];
            train_apps.insert(app);
        }
    }
    if train_apps.len() == apps.len() {
        return Err(AblationError::DegenerateSplit { side: "test" });
    }

    let keep_train: Vec<usize> =
        (0..matrix.n_rows()).filter(|i| train_apps.contains(app_ids[*i].as_str())).collect();
    let keep_test: Vec<usize> =
        (0..matrix.n_rows()).filter(|i| !train_apps.contains(app_ids[*i].as_str())).collect();
    let train = matrix.subset(&keep_train);
    let test = matrix.subset(&keep_test);
    let description = SplitDescription {
        seed: params.seed,
        train_fraction_target: params.train_fraction,
        train_row_fraction: train.n_rows() as f64 / matrix.n_rows() as f64,
        n_train_rows: train.n_rows(),
        n_test_rows: test.n_rows(),
        n_train_apps: train_apps.len(),
        n_test_apps: apps.len() - train_apps.len(),
    };
    Ok((train, test, description))
}

pub fn verify_app_disjoint(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
) -> Result<(), AblationError> {
    let a = train.app_ids.as_ref().ok_or(AblationError::AppIdsMissing)?;
    let b = test.app_ids.as_ref().ok_or(AblationError::AppIdsMissing)?;
    let train_apps: BTreeSet<&str> = a.iter().map(String::as_str).collect();
    let test_apps: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    match train_apps.intersection(&test_apps).next() {
        Some(app) => Err(AblationError::LeakedApp { app_id: (*app).to_string() }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEval {
    pub set: FeatureSet,
    pub n_features: usize,
    pub metrics: ConfusionMetrics,
    pub auc: f64,
    pub pr: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub threshold: f64,
    pub split: SplitDescription,
    pub train_balance: ClassBalance,
    pub test_balance: ClassBalance,
    pub rows: Vec<SetEval>,
}

fn balance_of(labels: &[bool]) -> ClassBalance {
    let n_pos = labels.iter().filter(|y| **y).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    let ratio = if labels.is_empty() { None } else { Some(n_pos as f64 / labels.len() as f64) };
    ClassBalance { n_pos, n_neg, ratio }
}

fn project(matrix: &FeatureMatrix, set: FeatureSet) -> (Vec<f64>, Vec<String>) {
    let names: Vec<String> =
        set.column_indices().iter().map(|i| FEATURES[*i].name.to_string()).collect();
    let mut values = Vec::with_capacity(matrix.n_rows() * names.len());
    for i in 0..matrix.n_rows() {
        values.extend(select_features(matrix.row(i), set));
    }
    (values, names)
}

fn eval_one_set(
    train_m: &FeatureMatrix,
    test_m: &FeatureMatrix,
    set: FeatureSet,
    threshold: f64,
    params: &TrainParams,
) -> Result<SetEval, AblationError> {
    let (train_values, names) = project(train_m, set);
    let (test_values, _) = project(test_m, set);
    let data = Dataset {
        values: &train_values,
        n_cols: names.len(),
        labels: &train_m.labels,
        feature_names: &names,
    };
    let model = train(&data, params)?;
    let scores = model.predict_batch(&test_values)?;
    Ok(SetEval {
        set,
        n_features: names.len(),
        metrics: confusion_metrics(&scores, &test_m.labels, threshold)?,
        auc: auc(&scores, &test_m.labels)?,
        pr: pr_curve(&scores, &test_m.labels)?,
    })
}

/// Trains one model per feature set on identical rows and scores each on the
/// held-out side. Set order in the report is the caller's order; evaluation
/// runs in parallel but assembly is positional, so the report is stable.
pub fn run_ablation(
    train_m: &FeatureMatrix,
    test_m: &FeatureMatrix,
    split: &SplitDescription,
    sets: &[FeatureSet],
    params: &TrainParams,
) -> Result<EvalReport, AblationError> {
    if !train_m.is_full_width() || !test_m.is_full_width() {
        return Err(AblationError::NotFullWidth);
    }
    verify_app_disjoint(train_m, test_m)?;
    let threshold = 0.5;
    let results: Vec<Result<SetEval, AblationError>> = sets
        .par_iter()
        .map(|set| eval_one_set(train_m, test_m, *set, threshold, params))
        .collect();
    let mut rows = Vec::with_capacity(sets.len());
    for r in results {
        rows.push(r?);
    }
    Ok(EvalReport {
        seed: params.seed,
        threshold,
        split: split.clone(),
        train_balance: balance_of(&train_m.labels),
        test_balance: balance_of(&test_m.labels),
        rows,
    })
}

pub const EVAL_HEADER: &str = "feature_set,precision,recall,f1,auc,accuracy";

pub fn write_eval_csv<W: std::io::Write>(w: &mut W, report: &EvalReport) -> std::io::Result<()> {
    writeln!(w, "{EVAL_HEADER}")?;
    for row in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.set.as_str(),
            row.metrics.precision,
            row.metrics.recall,
            row.metrics.f1,
            row.auc,
            row.metrics.accuracy
        )?;
    }
    Ok(())
}
