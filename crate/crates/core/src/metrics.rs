//! Classifier quality measures with explicit undefined markers.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("scores and labels differ in length: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("empty input")]
    Empty,
    #[error("both classes must be present")]
    SingleClass,
    #[error("score at index {0} is NaN")]
    NanScore(usize),
}

/// Metric value that keeps 0/0 cases distinguishable from a genuine zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Defined(f64),
    Undefined,
}

impl Metric {
    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Defined(v) => Some(v),
            Metric::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Metric::Defined(_))
    }

    fn ratio(num: usize, den: usize) -> Metric {
        if den == 0 {
            Metric::Undefined
        } else {
            Metric::Defined(num as f64 / den as f64)
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Defined(v) => write!(f, "{v}"),
            Metric::Undefined => write!(f, "undefined"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Metric::Defined(v) => s.serialize_f64(*v),
            Metric::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Metric::Defined(v)),
            Raw::Text(t) if t == "undefined" => Ok(Metric::Undefined),
            Raw::Text(t) => Err(D::Error::custom(format!("bad metric value {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub threshold: f64,
    pub counts: Confusion,
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
    pub accuracy: Metric,
}

/// Counts a score as positive iff it lies strictly above the threshold.
pub fn confusion_metrics(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ConfusionMetrics, MetricsError> {
    check_lengths(scores, labels)?;
    let mut c = Confusion { true_pos: 0, false_pos: 0, true_neg: 0, false_neg: 0 };
    for (i, (s, y)) in scores.iter().zip(labels).enumerate() {
        if s.is_nan() {
            return Err(MetricsError::NanScore(i));
        }
        match (*s > threshold, *y) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    let precision = Metric::ratio(c.true_pos, c.true_pos + c.false_pos);
    let recall = Metric::ratio(c.true_pos, c.true_pos + c.false_neg);
    let f1 = match (precision, recall) {
        (Metric::Defined(p), Metric::Defined(r)) if p + r > 0.0 => {
            Metric::Defined(2.0 * p * r / (p + r))
        }
        _ => Metric::Undefined,
    };
    Ok(ConfusionMetrics {
        threshold,
        counts: c,
        precision,
        recall,
        f1,
        accuracy: Metric::ratio(c.true_pos + c.true_neg, scores.len()),
    })
}

/// Probability that a random positive outranks a random negative, ties worth
/// half a win. The sweep accumulates the integer 2*wins + ties, so the result
/// is the same division a pairwise count would perform.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    check_lengths(scores, labels)?;
    for (i, s) in scores.iter().enumerate() {
        if s.is_nan() {
            return Err(MetricsError::NanScore(i));
        }
    }
    let n_pos = labels.iter().filter(|y| **y).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*a].partial_cmp(&scores[*b]).unwrap());

    let mut num2: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let pos_here = order[i..j].iter().filter(|k| labels[**k]).count() as u64;
        let neg_here = (j - i) as u64 - pos_here;
        num2 += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
        i = j;
    }
    Ok(num2 as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall pairs sweeping the decision threshold over every distinct
/// score, highest first; a point counts scores >= its threshold as positive.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>, MetricsError> {
    check_lengths(scores, labels)?;
    for (i, s) in scores.iter().enumerate() {
        if s.is_nan() {
            return Err(MetricsError::NanScore(i));
        }
    }
    let n_pos = labels.iter().filter(|y| **y).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap());

    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / n_pos as f64,
        });
    }
    Ok(points)
}

pub const PR_HEADER: &str = "threshold,precision,recall";

pub fn write_pr_csv<W: std::io::Write>(w: &mut W, points: &[PrPoint]) -> std::io::Result<()> {
    writeln!(w, "{PR_HEADER}")?;
    for p in points {
        writeln!(w, "{},{},{}", p.threshold, p.precision, p.recall)?;
    }
    Ok(())
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}
