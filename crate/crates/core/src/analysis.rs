//! Category, rating, and hourly contrasts between flagged and normal traffic.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeling::{AppStatus, LabelSet};
use crate::log_model::{AppCatalogEntry, EventKind, EventRecord, ALL_CATEGORIES};
use crate::rule_filter::{type1_rule_filter, FilterParams};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no {0} apps to build a distribution from")]
    NoApps(&'static str),
    #[error("no labeled {0} downloads to build a histogram from")]
    NoDownloads(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub suspicious_share: f64,
    pub all_share: f64,
}

pub const RATING_BIN_LABELS: [&str; 4] = ["[1,2)", "[2,3)", "[3,4)", "[4,5]"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingHistograms {
    pub suspicious: [f64; 4],
    pub normal: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyHistograms {
    pub positive: [f64; 24],
    pub negative: [f64; 24],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub total: usize,
    pub by_reason: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub category: Vec<CategoryRow>,
    pub rating: RatingHistograms,
    pub hourly: HourlyHistograms,
    pub filter: FilterSummary,
}

fn rating_bin(rating: f64) -> usize {
    match rating {
        r if r < 2.0 => 0,
        r if r < 3.0 => 1,
        r if r < 4.0 => 2,
        _ => 3,
    }
}

fn normalize<const N: usize>(counts: [u64; N]) -> [f64; N] {
    let total: u64 = counts.iter().sum();
    counts.map(|c| c as f64 / total as f64)
}

/// Builds the three contrast distributions plus a rule-filter tally. App
/// contrasts pit suspicious apps against normal or all apps; the hourly
/// contrast pits positively labeled downloads against negative ones.
pub fn comparative_analysis(
    log: &[EventRecord],
    catalog: &[AppCatalogEntry],
    labels: &LabelSet,
) -> Result<AnalysisReport, AnalysisError> {
    let suspicious: HashSet<&str> = labels
        .app_status
        .iter()
        .filter(|(_, s)| **s == AppStatus::Suspicious)
        .map(|(app, _)| app.as_str())
        .collect();
    let normal: HashSet<&str> = labels
        .app_status
        .iter()
        .filter(|(_, s)| **s == AppStatus::Normal)
        .map(|(app, _)| app.as_str())
        .collect();
    if catalog.is_empty() {
        return Err(AnalysisError::NoApps("catalog"));
    }
    if suspicious.is_empty() {
        return Err(AnalysisError::NoApps("suspicious"));
    }
    if normal.is_empty() {
        return Err(AnalysisError::NoApps("normal"));
    }

    let mut cat_suspicious = BTreeMap::new();
    let mut cat_all = BTreeMap::new();
    let mut rating_suspicious = [0u64; 4];
    let mut rating_normal = [0u64; 4];
    for app in catalog {
        *cat_all.entry(app.category).or_insert(0u64) += 1;
        if suspicious.contains(app.app_id.as_str()) {
            *cat_suspicious.entry(app.category).or_insert(0u64) += 1;
            rating_suspicious[rating_bin(app.rating)] += 1;
        } else if normal.contains(app.app_id.as_str()) {
            rating_normal[rating_bin(app.rating)] += 1;
        }
    }
    let n_suspicious: u64 = cat_suspicious.values().sum();
    if n_suspicious == 0 {
        // suspicious apps exist but none are in this catalog
        return Err(AnalysisError::NoApps("cataloged suspicious"));
    }
    let category = ALL_CATEGORIES
        .iter()
        .map(|c| CategoryRow {
            category: c.as_str().to_string(),
            suspicious_share: cat_suspicious.get(c).copied().unwrap_or(0) as f64
                / n_suspicious as f64,
            all_share: cat_all.get(c).copied().unwrap_or(0) as f64 / catalog.len() as f64,
        })
        .collect();
    if rating_normal.iter().sum::<u64>() == 0 {
        return Err(AnalysisError::NoApps("cataloged normal"));
    }

    let mut hourly_pos = [0u64; 24];
    let mut hourly_neg = [0u64; 24];
    for r in log {
        if r.kind != EventKind::Download {
            continue;
        }
        let hour = (r.ts.rem_euclid(86_400) / 3_600) as usize;
        if labels.positive_event_ids.contains(&r.event_id) {
            hourly_pos[hour] += 1;
        } else if labels.negative_event_ids.contains(&r.event_id) {
            hourly_neg[hour] += 1;
        }
    }
    if hourly_pos.iter().sum::<u64>() == 0 {
        return Err(AnalysisError::NoDownloads("positive"));
    }
    if hourly_neg.iter().sum::<u64>() == 0 {
        return Err(AnalysisError::NoDownloads("negative"));
    }

    let hits = type1_rule_filter(log, &FilterParams::default());
    let mut by_reason = BTreeMap::new();
    for h in &hits {
        *by_reason.entry(h.reason.as_str().to_string()).or_insert(0usize) += 1;
    }

    Ok(AnalysisReport {
        category,
        rating: RatingHistograms {
            suspicious: normalize(rating_suspicious),
            normal: normalize(rating_normal),
        },
        hourly: HourlyHistograms {
            positive: normalize(hourly_pos),
            negative: normalize(hourly_neg),
        },
        filter: FilterSummary { total: hits.len(), by_reason },
    })
}

/// Population standard deviation over mean; spiky histograms score high,
/// steady ones low.
pub fn coefficient_of_variation(hist: &[f64]) -> f64 {
    let n = hist.len() as f64;
    let mean = hist.iter().sum::<f64>() / n;
    let var = hist.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    var.sqrt() / mean
}

pub const CATEGORY_HEADER: &str = "category,suspicious_share,all_share";
pub const RATING_HEADER: &str = "bin,suspicious,normal";
pub const HOURLY_HEADER: &str = "hour,positive,negative";

pub fn write_category_csv<W: std::io::Write>(
    w: &mut W,
    report: &AnalysisReport,
) -> std::io::Result<()> {
    writeln!(w, "{CATEGORY_HEADER}")?;
    for row in &report.category {
        writeln!(w, "{},{},{}", row.category, row.suspicious_share, row.all_share)?;
    }
    Ok(())
}

pub fn write_rating_csv<W: std::io::Write>(
    w: &mut W,
    report: &AnalysisReport,
) -> std::io::Result<()> {
    writeln!(w, "{RATING_HEADER}")?;
    for (i, label) in RATING_BIN_LABELS.iter().enumerate() {
        writeln!(w, "\"{label}\",{},{}", report.rating.suspicious[i], report.rating.normal[i])?;
    }
    Ok(())
}

pub fn write_hourly_csv<W: std::io::Write>(
    w: &mut W,
    report: &AnalysisReport,
) -> std::io::Result<()> {
    writeln!(w, "{HOURLY_HEADER}")?;
    for hour in 0..24 {
        writeln!(w, "{hour},{},{}", report.hourly.positive[hour], report.hourly.negative[hour])?;
    }
    Ok(())
}
