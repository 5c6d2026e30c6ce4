//! From-scratch gradient-boosted trees for binary classification, plus a
//! randomized-forest Gini importance. No learning dependencies; given a seed,
//! models and importances are identical across runs and platforms.

mod forest;
mod train;

pub use forest::{gini_importance, write_importance_csv, ImportanceParams, ImportanceReport};
pub use train::{train, train_weighted, train_with_trace, ChosenSplit, NodeTrace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("bad training parameter: {msg}")]
    BadParams { msg: String },
    #[error("need at least 2 rows, got {n}")]
    TooFewRows { n: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("feature {column:?} contains a non-finite value")]
    NonFinite { column: String },
    #[error("row has {found} features, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("gini impurity of an empty node is undefined")]
    EmptyNode,
    #[error("no feature admits an impurity-reducing split")]
    NoInformativeSplits,
    #[error("model format version {found}, this build reads {expected}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("model serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Rows are routed left when `x[feature] < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Arena with the root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature as usize] < *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn max_depth(&self) -> usize {
        fn depth(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + depth(nodes, *left as usize).max(depth(nodes, *right as usize))
                }
            }
        }
        depth(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub lambda_l2: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            n_trees: 200,
            max_depth: 6,
            learning_rate: 0.1,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            lambda_l2: 1.0,
            seed: 42,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        let bad = |msg: &str| Err(TreeError::BadParams { msg: msg.to_string() });
        if self.max_depth == 0 || self.max_depth > 32 {
            return bad("max_depth must be in 1..=32");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad("colsample must be in (0, 1]");
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad("min_child_weight must be finite and non-negative");
        }
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return bad("lambda_l2 must be finite and non-negative");
        }
        Ok(())
    }
}

/// Borrowed training view: row-major values, one boolean label per row.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub values: &'a [f64],
    pub n_cols: usize,
    pub labels: &'a [bool],
    pub feature_names: &'a [String],
}

impl<'a> Dataset<'a> {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &'a [f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub(crate) fn check(&self) -> Result<(), TreeError> {
        let n = self.n_rows();
        if n < 2 {
            return Err(TreeError::TooFewRows { n });
        }
        assert_eq!(self.values.len(), n * self.n_cols, "ragged dataset");
        assert_eq!(self.feature_names.len(), self.n_cols, "feature name count");
        if self.labels.iter().all(|y| *y) || self.labels.iter().all(|y| !*y) {
            return Err(TreeError::SingleClass);
        }
        for col in 0..self.n_cols {
            for row in 0..n {
                if !self.at(row, col).is_finite() {
                    return Err(TreeError::NonFinite { column: self.feature_names[col].clone() });
                }
            }
        }
        Ok(())
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub format_version: u32,
    pub params: TrainParams,
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    /// Registry hash of the feature layer this model was built against.
    pub feature_manifest_hash: String,
    /// Column names, in the order rows must be presented.
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.eval(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64, TreeError> {
        if row.len() != self.n_features {
            return Err(TreeError::DimensionMismatch { expected: self.n_features, found: row.len() });
        }
        Ok(logistic(self.raw_score(row)))
    }

    pub fn predict_batch(&self, values: &[f64]) -> Result<Vec<f64>, TreeError> {
        if values.len() % self.n_features != 0 {
            return Err(TreeError::DimensionMismatch {
                expected: self.n_features,
                found: values.len() % self.n_features,
            });
        }
        values.chunks_exact(self.n_features).map(|row| self.predict(row)).collect()
    }

    pub fn to_json(&self) -> Result<String, TreeError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<TreeEnsemble, TreeError> {
        #[derive(Deserialize)]
        struct VersionProbe {
            format_version: u32,
        }
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(TreeError::VersionMismatch {
                expected: MODEL_FORMAT_VERSION,
                found: probe.format_version,
            });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), TreeError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<TreeEnsemble, TreeError> {
        TreeEnsemble::from_json(&std::fs::read_to_string(path)?)
    }
}

/// 1 - p0^2 - p1^2 over a two-class count pair.
pub fn gini_impurity(pos: u64, neg: u64) -> Result<f64, TreeError> {
    let total = pos + neg;
    if total == 0 {
        return Err(TreeError::EmptyNode);
    }
    let p = pos as f64 / total as f64;
    let q = neg as f64 / total as f64;
    Ok(1.0 - p * p - q * q)
}
