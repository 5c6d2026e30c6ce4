//! Ground-truth labels from the vendor flag: apps with a majority of
//! non-vendor downloads are suspicious, pure-vendor apps are normal, and the
//! band in between is excluded from training.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write as IoWrite};
use std::path::Path;

use rand::seq::index::sample as index_sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log_model::{EventKind, EventRecord};
use crate::rng::{stream_rng, Stream};

pub const LABEL_HEADER: &str = "event_id,label";
pub const APP_STATUS_HEADER: &str = "app_id,status";

const SECS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("suspicion ratio undefined for an app with no downloads")]
    EmptyRatio,
    #[error("threshold must be a fraction in [0,1] with nonzero denominator, got {0}")]
    BadThreshold(String),
    #[error("line {line}: expected header {expected:?}, found {found:?}")]
    Header { line: usize, expected: &'static str, found: String },
    #[error("line {line}: {msg}")]
    Field { line: usize, msg: String },
}

/// Suspicion cutoff kept as an exact rational so boundary apps (exactly half
/// non-vendor) compare deterministically: suspicious iff
/// `non_vendor / total > num / den`, evaluated in integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspicionThreshold {
    pub num: u64,
    pub den: u64,
}

impl Default for SuspicionThreshold {
    fn default() -> Self {
        SuspicionThreshold { num: 1, den: 2 }
    }
}

impl SuspicionThreshold {
    /// Parses a decimal string ("0.5", "0.35") into the exact rational it
    /// spells, so no binary rounding sneaks into the comparison.
    pub fn from_decimal_str(s: &str) -> Result<Self, LabelError> {
        let bad = || LabelError::BadThreshold(s.to_string());
        let (int_part, frac_part) = match s.split_once('.') {
            Some((a, b)) => (a, b),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
            || frac_part.len() > 9
        {
            return Err(bad());
        }
        let int_val: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac_part.len() as u32);
        let frac_val: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
        let num = int_val * den + frac_val;
        if num > den {
            return Err(bad());
        }
        let g = gcd(num.max(1), den);
        Ok(SuspicionThreshold { num: num / g, den: den / g })
    }

    pub fn exceeded_by(&self, non_vendor: u64, total: u64) -> bool {
        (non_vendor as u128) * (self.den as u128) > (self.num as u128) * (total as u128)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Pos,
    Neg,
    Excluded,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Pos => "pos",
            Label::Neg => "neg",
            Label::Excluded => "excluded",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "pos" => Some(Label::Pos),
            "neg" => Some(Label::Neg),
            "excluded" => Some(Label::Excluded),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppStatus {
    Suspicious,
    Normal,
    Excluded,
}

impl AppStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            AppStatus::Suspicious => "suspicious",
            AppStatus::Normal => "normal",
            AppStatus::Excluded => "excluded",
        }
    }

    pub fn parse(s: &str) -> Option<AppStatus> {
        match s {
            "suspicious" => Some(AppStatus::Suspicious),
            "normal" => Some(AppStatus::Normal),
            "excluded" => Some(AppStatus::Excluded),
            _ => None,
        }
    }
}

/// Which downloads count: the whole log span, or k whole UTC days sampled by
/// seed from the days the span covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelWindow {
    FullSpan,
    SampledDays { k: u32, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelParams {
    pub threshold: SuspicionThreshold,
    pub window: LabelWindow,
    /// Sensitivity switch: count the excluded band as negative instead of
    /// dropping it. App statuses still record the band.
    pub fold_excluded: bool,
}

impl Default for LabelParams {
    fn default() -> Self {
        LabelParams {
            threshold: SuspicionThreshold::default(),
            window: LabelWindow::FullSpan,
            fold_excluded: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    pub positive_event_ids: BTreeSet<u64>,
    pub negative_event_ids: BTreeSet<u64>,
    pub excluded_event_ids: BTreeSet<u64>,
    pub app_status: BTreeMap<String, AppStatus>,
    pub window: (i64, i64),
    /// UTC day starts actually counted; None when the full span was used.
    pub sampled_day_starts: Option<Vec<i64>>,
}

impl LabelSet {
    pub fn label_of(&self, event_id: u64) -> Option<Label> {
        if self.positive_event_ids.contains(&event_id) {
            Some(Label::Pos)
        } else if self.negative_event_ids.contains(&event_id) {
            Some(Label::Neg)
        } else if self.excluded_event_ids.contains(&event_id) {
            Some(Label::Excluded)
        } else {
            None
        }
    }

    pub fn labeled_len(&self) -> usize {
        self.positive_event_ids.len() + self.negative_event_ids.len() + self.excluded_event_ids.len()
    }
}

/// Non-vendor download fraction of one app's download records.
pub fn app_suspicion_ratio(downloads: &[&EventRecord]) -> Result<f64, LabelError> {
    if downloads.is_empty() {
        return Err(LabelError::EmptyRatio);
    }
    let non_vendor = downloads.iter().filter(|r| !r.vendor_verified).count();
    Ok(non_vendor as f64 / downloads.len() as f64)
}

pub fn build_labels(log: &[EventRecord], params: &LabelParams) -> LabelSet {
    let (window, day_filter) = resolve_window(log, params.window);

    let mut counts: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for r in log {
        if r.kind != EventKind::Download || !in_window(r.ts, window, day_filter.as_ref()) {
            continue;
        }
        let entry = counts.entry(r.app_id.as_str()).or_insert((0, 0));
        entry.0 += 1;
        if !r.vendor_verified {
            entry.1 += 1;
        }
    }

    let mut app_status = BTreeMap::new();
    for (app, (total, non_vendor)) in &counts {
        let status = if params.threshold.exceeded_by(*non_vendor, *total) {
            AppStatus::Suspicious
        } else if *non_vendor == 0 {
            AppStatus::Normal
        } else {
            AppStatus::Excluded
        };
        app_status.insert((*app).to_string(), status);
    }

    let mut positive_event_ids = BTreeSet::new();
    let mut negative_event_ids = BTreeSet::new();
    let mut excluded_event_ids = BTreeSet::new();
    for r in log {
        if r.kind != EventKind::Download || !in_window(r.ts, window, day_filter.as_ref()) {
            continue;
        }
        match app_status[&r.app_id] {
            AppStatus::Suspicious => positive_event_ids.insert(r.event_id),
            AppStatus::Normal => negative_event_ids.insert(r.event_id),
            AppStatus::Excluded if params.fold_excluded => negative_event_ids.insert(r.event_id),
            AppStatus::Excluded => excluded_event_ids.insert(r.event_id),
        };
    }

    LabelSet {
        positive_event_ids,
        negative_event_ids,
        excluded_event_ids,
        app_status,
        window,
        sampled_day_starts: day_filter.map(|d| d.iter().map(|day| day * SECS_PER_DAY).collect()),
    }
}

fn resolve_window(log: &[EventRecord], window: LabelWindow) -> ((i64, i64), Option<BTreeSet<i64>>) {
    let span = match (log.iter().map(|r| r.ts).min(), log.iter().map(|r| r.ts).max()) {
        (Some(lo), Some(hi)) => (lo, hi + 1),
        _ => (0, 0),
    };
    match window {
        LabelWindow::FullSpan => (span, None),
        LabelWindow::SampledDays { k, seed } => {
            let first_day = span.0.div_euclid(SECS_PER_DAY);
            let last_day = (span.1 - 1).div_euclid(SECS_PER_DAY);
            let n_days = (last_day - first_day + 1).max(0) as usize;
            let take = (k as usize).min(n_days);
            let mut rng = stream_rng(seed, Stream::DaySampling);
            let chosen: BTreeSet<i64> = index_sample(&mut rng, n_days, take)
                .into_iter()
                .map(|i| first_day + i as i64)
                .collect();
            (span, Some(chosen))
        }
    }
}

fn in_window(ts: i64, window: (i64, i64), days: Option<&BTreeSet<i64>>) -> bool {
    if ts < window.0 || ts >= window.1 {
        return false;
    }
    match days {
        Some(days) => days.contains(&ts.div_euclid(SECS_PER_DAY)),
        None => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassBalance {
    pub n_pos: u64,
    pub n_neg: u64,
    /// n_pos / (n_pos + n_neg); None when there is nothing to divide by.
    pub ratio: Option<f64>,
}

pub fn class_balance(labels: &LabelSet) -> ClassBalance {
    let n_pos = labels.positive_event_ids.len() as u64;
    let n_neg = labels.negative_event_ids.len() as u64;
    let ratio = if n_pos + n_neg == 0 { None } else { Some(n_pos as f64 / (n_pos + n_neg) as f64) };
    ClassBalance { n_pos, n_neg, ratio }
}

pub fn write_labels<W: IoWrite>(out: &mut W, labels: &LabelSet) -> Result<(), LabelError> {
    writeln!(out, "{LABEL_HEADER}")?;
    let mut rows: Vec<(u64, Label)> = labels
        .positive_event_ids
        .iter()
        .map(|id| (*id, Label::Pos))
        .chain(labels.negative_event_ids.iter().map(|id| (*id, Label::Neg)))
        .chain(labels.excluded_event_ids.iter().map(|id| (*id, Label::Excluded)))
        .collect();
    rows.sort_by_key(|(id, _)| *id);
    for (id, label) in rows {
        writeln!(out, "{id},{}", label.as_str())?;
    }
    Ok(())
}

pub fn write_labels_file(path: &Path, labels: &LabelSet) -> Result<(), LabelError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_labels(&mut out, labels)?;
    out.flush()?;
    Ok(())
}

pub fn parse_labels<R: Read>(input: R) -> Result<Vec<(u64, Label)>, LabelError> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != LABEL_HEADER {
        return Err(LabelError::Header { line: 1, expected: LABEL_HEADER, found: header });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| LabelError::Field { line: line_no, msg: "expected 2 fields".into() })?;
        let id: u64 = id
            .parse()
            .map_err(|_| LabelError::Field { line: line_no, msg: format!("bad event_id {id:?}") })?;
        let label = Label::parse(label)
            .ok_or_else(|| LabelError::Field { line: line_no, msg: format!("bad label {label:?}") })?;
        rows.push((id, label));
    }
    Ok(rows)
}

pub fn parse_labels_file(path: &Path) -> Result<Vec<(u64, Label)>, LabelError> {
    parse_labels(std::fs::File::open(path)?)
}

pub fn write_app_status<W: IoWrite>(out: &mut W, labels: &LabelSet) -> Result<(), LabelError> {
    writeln!(out, "{APP_STATUS_HEADER}")?;
    for (app, status) in &labels.app_status {
        writeln!(out, "{app},{}", status.as_str())?;
    }
    Ok(())
}

pub fn write_app_status_file(path: &Path, labels: &LabelSet) -> Result<(), LabelError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_app_status(&mut out, labels)?;
    out.flush()?;
    Ok(())
}

pub fn parse_app_status<R: Read>(input: R) -> Result<BTreeMap<String, AppStatus>, LabelError> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != APP_STATUS_HEADER {
        return Err(LabelError::Header { line: 1, expected: APP_STATUS_HEADER, found: header });
    }
    let mut statuses = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let (app, status) = line
            .split_once(',')
            .ok_or_else(|| LabelError::Field { line: line_no, msg: "expected 2 fields".into() })?;
        let status = AppStatus::parse(status)
            .ok_or_else(|| LabelError::Field { line: line_no, msg: format!("bad status {status:?}") })?;
        statuses.insert(app.to_string(), status);
    }
    Ok(statuses)
}

pub fn parse_app_status_file(path: &Path) -> Result<BTreeMap<String, AppStatus>, LabelError> {
    parse_app_status(std::fs::File::open(path)?)
}

/// Rebuilds a label set from its two exported files. The window is supplied
/// by the caller (usually the log's full span); the files do not record it.
pub fn read_label_set(
    labels_path: &Path,
    status_path: &Path,
    window: (i64, i64),
) -> Result<LabelSet, LabelError> {
    let mut set = LabelSet {
        positive_event_ids: BTreeSet::new(),
        negative_event_ids: BTreeSet::new(),
        excluded_event_ids: BTreeSet::new(),
        app_status: parse_app_status_file(status_path)?,
        window,
        sampled_day_starts: None,
    };
    for (id, label) in parse_labels_file(labels_path)? {
        match label {
            Label::Pos => set.positive_event_ids.insert(id),
            Label::Neg => set.negative_event_ids.insert(id),
            Label::Excluded => set.excluded_event_ids.insert(id),
        };
    }
    Ok(set)
}
