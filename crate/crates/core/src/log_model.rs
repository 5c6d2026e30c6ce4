//! Market event log, app catalog and ground-truth record types with CSV IO.
//!
//! The CSV formats are pinned: fixed column order, no quoting, booleans as
//! 0/1, a missing device id as an empty field, catalog ratings written with
//! exactly one decimal. `parse(write(x)) == x` byte-for-byte.

use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

/// Bump when any of the CSV formats below change shape.
pub const LOG_FORMAT_VERSION: u32 = 1;

pub const EVENT_HEADER: &str = "event_id,ts,kind,device_id,vendor_verified,app_id,ip_hash,source";
pub const CATALOG_HEADER: &str = "app_id,category,rating,release_ts";
pub const TRUTH_HEADER: &str = "event_id,fraud_type";

#[derive(Error, Debug)]
pub enum LogError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected header `{expected}`, found `{found}`")]
    Header {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, field `{field}`: {msg}")]
    Field {
        line: usize,
        field: &'static str,
        msg: String,
    },
    #[error("line {line}: {msg}")]
    Invariant { line: usize, msg: String },
    #[error("line {line}: duplicate event_id {id}")]
    DuplicateEventId { line: usize, id: u64 },
    #[error("line {line}: duplicate app_id `{id}`")]
    DuplicateAppId { line: usize, id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Download,
    Search,
    View,
    Install,
    Update,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Download => "download",
            EventKind::Search => "search",
            EventKind::View => "view",
            EventKind::Install => "install",
            EventKind::Update => "update",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "download" => EventKind::Download,
            "search" => EventKind::Search,
            "view" => EventKind::View,
            "install" => EventKind::Install,
            "update" => EventKind::Update,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Client,
    Portal,
    Update,
    Null,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Client => "client",
            Source::Portal => "portal",
            Source::Update => "update",
            Source::Null => "null",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "client" => Source::Client,
            "portal" => Source::Portal,
            "update" => Source::Update,
            "null" => Source::Null,
            _ => return None,
        })
    }
}

/// One row of the market event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub event_id: u64,
    /// Epoch seconds UTC, non-negative.
    pub ts: i64,
    pub kind: EventKind,
    /// 16 lowercase hex chars, or empty when the client sent no device id.
    pub device_id: String,
    pub vendor_verified: bool,
    pub app_id: String,
    /// 16 lowercase hex chars, never empty.
    pub ip_hash: String,
    pub source: Source,
}

impl EventRecord {
    /// Checks the record-level invariants; `line` is only used in messages.
    pub fn validate(&self, line: usize) -> Result<(), LogError> {
        if self.ts < 0 {
            return Err(LogError::Invariant {
                line,
                msg: format!("ts {} is negative", self.ts),
            });
        }
        if !self.device_id.is_empty() && !is_hex16(&self.device_id) {
            return Err(LogError::Invariant {
                line,
                msg: format!("device_id `{}` is not empty or 16 hex chars", self.device_id),
            });
        }
        if !is_hex16(&self.ip_hash) {
            return Err(LogError::Invariant {
                line,
                msg: format!("ip_hash `{}` is not 16 hex chars", self.ip_hash),
            });
        }
        if self.vendor_verified && self.device_id.is_empty() {
            return Err(LogError::Invariant {
                line,
                msg: "vendor_verified=1 requires a non-empty device_id".into(),
            });
        }
        if self.source == Source::Portal && self.kind != EventKind::Download {
            return Err(LogError::Invariant {
                line,
                msg: format!("source=portal requires kind=download, found kind={}", self.kind.as_str()),
            });
        }
        if self.kind == EventKind::Update && self.source != Source::Update {
            return Err(LogError::Invariant {
                line,
                msg: format!("kind=update requires source=update, found source={}", self.source.as_str()),
            });
        }
        if !is_plain_token(&self.app_id) {
            return Err(LogError::Invariant {
                line,
                msg: format!("app_id `{}` is empty or has non [A-Za-z0-9_-] chars", self.app_id),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Finance,
    Game,
    Tools,
    Social,
    Shopping,
    Education,
    Life,
    Other,
}

pub const ALL_CATEGORIES: [Category; 8] = [
    Category::Finance,
    Category::Game,
    Category::Tools,
    Category::Social,
    Category::Shopping,
    Category::Education,
    Category::Life,
    Category::Other,
];

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Finance => "finance",
            Category::Game => "game",
            Category::Tools => "tools",
            Category::Social => "social",
            Category::Shopping => "shopping",
            Category::Education => "education",
            Category::Life => "life",
            Category::Other => "other",
        }
    }

    /// Stable ordinal used when the category is fed to the trees.
    pub fn code(self) -> u8 {
        ALL_CATEGORIES.iter().position(|c| *c == self).unwrap() as u8
    }

    fn parse(s: &str) -> Option<Self> {
        ALL_CATEGORIES.iter().copied().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppCatalogEntry {
    pub app_id: String,
    pub category: Category,
    /// In [1.0, 5.0], quantized to one decimal.
    pub rating: f64,
    pub release_ts: i64,
}

impl AppCatalogEntry {
    pub fn validate(&self, line: usize) -> Result<(), LogError> {
        if !is_plain_token(&self.app_id) {
            return Err(LogError::Invariant {
                line,
                msg: format!("app_id `{}` is empty or has non [A-Za-z0-9_-] chars", self.app_id),
            });
        }
        if !(1.0..=5.0).contains(&self.rating) {
            return Err(LogError::Invariant {
                line,
                msg: format!("rating {} outside [1.0, 5.0]", self.rating),
            });
        }
        if self.release_ts < 0 {
            return Err(LogError::Invariant {
                line,
                msg: format!("release_ts {} is negative", self.release_ts),
            });
        }
        Ok(())
    }
}

/// Simulator-assigned provenance of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FraudType {
    /// Organic traffic, code 0.
    Legit,
    /// Scripted farm injection, code 1.
    Farm,
    /// Download bot with device reset, code 2.
    Bot,
    /// Paid crowd worker, code 3.
    Crowd,
}

impl FraudType {
    pub fn code(self) -> u8 {
        match self {
            FraudType::Legit => 0,
            FraudType::Farm => 1,
            FraudType::Bot => 2,
            FraudType::Crowd => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => FraudType::Legit,
            1 => FraudType::Farm,
            2 => FraudType::Bot,
            3 => FraudType::Crowd,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundTruthEntry {
    pub event_id: u64,
    pub fraud_type: FraudType,
}

fn is_hex16(s: &str) -> bool {
    s.len() == 16 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

fn is_plain_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

fn split_fields<'a>(line: &'a str, expected: usize, lineno: usize) -> Result<Vec<&'a str>, LogError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != expected {
        return Err(LogError::FieldCount {
            line: lineno,
            expected,
            found: fields.len(),
        });
    }
    Ok(fields)
}

fn parse_u64(s: &str, field: &'static str, line: usize) -> Result<u64, LogError> {
    s.parse().map_err(|_| LogError::Field {
        line,
        field,
        msg: format!("`{s}` is not an unsigned integer"),
    })
}

fn parse_i64(s: &str, field: &'static str, line: usize) -> Result<i64, LogError> {
    s.parse().map_err(|_| LogError::Field {
        line,
        field,
        msg: format!("`{s}` is not an integer"),
    })
}

fn expect_header(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    expected: &'static str,
) -> Result<(), LogError> {
    let first = match lines.next() {
        Some(l) => l?,
        None => {
            return Err(LogError::Header {
                line: 1,
                expected,
                found: "<end of file>".into(),
            })
        }
    };
    if first != expected {
        return Err(LogError::Header {
            line: 1,
            expected,
            found: first,
        });
    }
    Ok(())
}

/// Parses an event log, validating every record invariant and event_id
/// uniqueness. Line numbers in errors are 1-based including the header.
pub fn parse_log(reader: impl BufRead) -> Result<Vec<EventRecord>, LogError> {
    let mut lines = reader.lines();
    expect_header(&mut lines, EVENT_HEADER)?;
    let mut records = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let f = split_fields(&line, 8, lineno)?;
        let record = EventRecord {
            event_id: parse_u64(f[0], "event_id", lineno)?,
            ts: parse_i64(f[1], "ts", lineno)?,
            kind: EventKind::parse(f[2]).ok_or_else(|| LogError::Field {
                line: lineno,
                field: "kind",
                msg: format!("unknown kind `{}`", f[2]),
            })?,
            device_id: f[3].to_string(),
            vendor_verified: match f[4] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(LogError::Field {
                        line: lineno,
                        field: "vendor_verified",
                        msg: format!("`{other}` is not 0 or 1"),
                    })
                }
            },
            app_id: f[5].to_string(),
            ip_hash: f[6].to_string(),
            source: Source::parse(f[7]).ok_or_else(|| LogError::Field {
                line: lineno,
                field: "source",
                msg: format!("unknown source `{}`", f[7]),
            })?,
        };
        record.validate(lineno)?;
        if !seen.insert(record.event_id) {
            return Err(LogError::DuplicateEventId {
                line: lineno,
                id: record.event_id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_log(mut w: impl Write, records: &[EventRecord]) -> std::io::Result<()> {
    let mut buf = String::with_capacity(64 * (records.len() + 1));
    buf.push_str(EVENT_HEADER);
    buf.push('\n');
    for r in records {
        use std::fmt::Write as _;
        let _ = writeln!(
            buf,
            "{},{},{},{},{},{},{},{}",
            r.event_id,
            r.ts,
            r.kind.as_str(),
            r.device_id,
            u8::from(r.vendor_verified),
            r.app_id,
            r.ip_hash,
            r.source.as_str()
        );
    }
    w.write_all(buf.as_bytes())
}

/// Parses the app catalog; rejects out-of-range ratings and duplicate ids.
pub fn parse_catalog(reader: impl BufRead) -> Result<Vec<AppCatalogEntry>, LogError> {
    let mut lines = reader.lines();
    expect_header(&mut lines, CATALOG_HEADER)?;
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let f = split_fields(&line, 4, lineno)?;
        let entry = AppCatalogEntry {
            app_id: f[0].to_string(),
            category: Category::parse(f[1]).ok_or_else(|| LogError::Field {
                line: lineno,
                field: "category",
                msg: format!("unknown category `{}`", f[1]),
            })?,
            rating: f[2].parse().map_err(|_| LogError::Field {
                line: lineno,
                field: "rating",
                msg: format!("`{}` is not a number", f[2]),
            })?,
            release_ts: parse_i64(f[3], "release_ts", lineno)?,
        };
        entry.validate(lineno)?;
        if !seen.insert(entry.app_id.clone()) {
            return Err(LogError::DuplicateAppId {
                line: lineno,
                id: entry.app_id,
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_catalog(mut w: impl Write, entries: &[AppCatalogEntry]) -> std::io::Result<()> {
    let mut buf = String::with_capacity(32 * (entries.len() + 1));
    buf.push_str(CATALOG_HEADER);
    buf.push('\n');
    for e in entries {
        use std::fmt::Write as _;
        // Ratings are one-decimal by contract; {:.1} keeps rewrite byte-exact.
        let _ = writeln!(buf, "{},{},{:.1},{}", e.app_id, e.category.as_str(), e.rating, e.release_ts);
    }
    w.write_all(buf.as_bytes())
}

pub fn parse_ground_truth(reader: impl BufRead) -> Result<Vec<GroundTruthEntry>, LogError> {
    let mut lines = reader.lines();
    expect_header(&mut lines, TRUTH_HEADER)?;
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let f = split_fields(&line, 2, lineno)?;
        let event_id = parse_u64(f[0], "event_id", lineno)?;
        let code = f[1].parse::<u8>().ok().and_then(FraudType::from_code);
        let fraud_type = code.ok_or_else(|| LogError::Field {
            line: lineno,
            field: "fraud_type",
            msg: format!("`{}` is not in 0..=3", f[1]),
        })?;
        if !seen.insert(event_id) {
            return Err(LogError::DuplicateEventId { line: lineno, id: event_id });
        }
        entries.push(GroundTruthEntry { event_id, fraud_type });
    }
    Ok(entries)
}

pub fn write_ground_truth(mut w: impl Write, entries: &[GroundTruthEntry]) -> std::io::Result<()> {
    let mut buf = String::with_capacity(12 * (entries.len() + 1));
    buf.push_str(TRUTH_HEADER);
    buf.push('\n');
    for e in entries {
        use std::fmt::Write as _;
        let _ = writeln!(buf, "{},{}", e.event_id, e.fraud_type.code());
    }
    w.write_all(buf.as_bytes())
}
