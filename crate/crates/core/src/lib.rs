//! Desk-scale lab for studying download-fraud traffic in a synthetic app market.
//!
//! The pipeline: simulate a market event log with injected fraud campaigns,
//! flag farm-script records with source/device rules, label apps by their
//! non-vendor download share, extract per-record behavioral features, train
//! gradient-boosted trees from scratch, and evaluate (ablations, feature
//! importance, distribution contrasts).

pub mod ablation;
pub mod analysis;
pub mod config;
pub mod features;
pub mod labeling;
pub mod log_model;
pub mod metrics;
pub mod rng;
pub mod rule_filter;
pub mod simulator;
pub mod trees;

pub use config::SimConfig;
pub use features::{EntityProfiles, FeatureMatrix, FeatureSet};
pub use labeling::{Label, LabelSet};
pub use log_model::{AppCatalogEntry, Category, EventKind, EventRecord, FraudType, Source};
pub use metrics::{auc, confusion_metrics, ConfusionMetrics, Metric};
pub use trees::{TrainParams, TreeEnsemble};
