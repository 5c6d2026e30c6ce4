//! Feature vectors per labeled download and the exported matrix CSV.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write as IoWrite};
use std::path::Path;

use super::profiles::EntityProfiles;
use super::{feature_index, FeatureError, FeatureSet, FEATURES, NEW_THRESHOLD_SECS, N_FEATURES};
use crate::labeling::{Label, LabelSet};
use crate::log_model::{AppCatalogEntry, EventKind, EventRecord};

pub fn catalog_lookup(catalog: &[AppCatalogEntry]) -> HashMap<&str, &AppCatalogEntry> {
    catalog.iter().map(|e| (e.app_id.as_str(), e)).collect()
}

/// One record's full feature vector in registry column order. The vendor flag
/// is deliberately unreachable from here.
pub fn featurize(
    r: &EventRecord,
    profiles: &EntityProfiles,
    catalog: &HashMap<&str, &AppCatalogEntry>,
) -> Result<[f64; N_FEATURES], FeatureError> {
    debug_assert_eq!(r.kind, EventKind::Download);
    let mut v = [0.0; N_FEATURES];

    match profiles.device(&r.device_id) {
        Some(d) if !r.device_id.is_empty() => {
            v[0] = if r.ts - d.first_seen_ts < NEW_THRESHOLD_SECS { 1.0 } else { 0.0 };
            v[1] = d.total_downloads as f64;
            v[2] = d.avg_downloads_per_hour;
            v[3] = d.max_downloads_per_hour as f64;
            v[4] = d.total_searches as f64;
            v[5] = d.total_views as f64;
            v[6] = d.distinct_apps as f64;
            v[7] = d.distinct_ips as f64;
        }
        // missing or never-seen device: a fresh device with no history
        _ => v[0] = 1.0,
    }

    let entry = catalog
        .get(r.app_id.as_str())
        .ok_or_else(|| FeatureError::UnknownApp { app_id: r.app_id.clone() })?;
    v[8] = if r.ts - entry.release_ts < NEW_THRESHOLD_SECS { 1.0 } else { 0.0 };
    if let Some(a) = profiles.app(&r.app_id) {
        v[9] = a.total_downloads as f64;
        v[10] = a.avg_downloads_per_hour;
        v[11] = a.max_downloads_per_hour as f64;
        v[12] = a.total_installs as f64;
        v[13] = a.total_views as f64;
        v[14] = a.total_searches as f64;
        v[15] = a.client_download_fraction;
    }
    v[16] = entry.category.code() as f64;
    v[17] = entry.rating;

    if let Some(ip) = profiles.ip(&r.ip_hash) {
        v[18] = ip.total_downloads as f64;
        v[19] = ip.max_downloads_per_hour as f64;
        v[20] = ip.avg_downloads_per_device as f64;
    }
    Ok(v)
}

/// Pure projection of a full row onto a feature set.
pub fn select_features(row: &[f64], set: FeatureSet) -> Vec<f64> {
    set.column_indices().iter().map(|i| row[*i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// row-major, n_rows x columns.len()
    pub values: Vec<f64>,
    pub event_ids: Vec<u64>,
    /// true = positive
    pub labels: Vec<bool>,
    /// registry indices of the columns present, strictly increasing
    pub columns: Vec<usize>,
    /// per-row app ids, kept for app-disjoint splitting; not exported to CSV
    pub app_ids: Option<Vec<String>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.event_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|&i| FEATURES[i].name.to_string()).collect()
    }

    pub fn is_full_width(&self) -> bool {
        self.columns.len() == N_FEATURES
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    /// Rows whose indices are in `keep`, preserving order.
    pub fn subset(&self, keep: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(keep.len() * self.n_cols());
        for &i in keep {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            values,
            event_ids: keep.iter().map(|&i| self.event_ids[i]).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            columns: self.columns.clone(),
            app_ids: self
                .app_ids
                .as_ref()
                .map(|apps| keep.iter().map(|&i| apps[i].clone()).collect()),
        }
    }

    /// Same rows, only the set's columns. Every wanted column must be present.
    pub fn project(&self, set: FeatureSet) -> Result<FeatureMatrix, FeatureError> {
        let wanted = set.column_indices();
        let mut positions = Vec::with_capacity(wanted.len());
        for idx in &wanted {
            let pos = self.columns.iter().position(|c| c == idx).ok_or_else(|| {
                FeatureError::MissingColumn { name: FEATURES[*idx].name.to_string() }
            })?;
            positions.push(pos);
        }
        let mut values = Vec::with_capacity(self.n_rows() * positions.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            values.extend(positions.iter().map(|&p| row[p]));
        }
        Ok(FeatureMatrix {
            values,
            event_ids: self.event_ids.clone(),
            labels: self.labels.clone(),
            columns: wanted,
            app_ids: self.app_ids.clone(),
        })
    }
}

/// One row per labeled download, in log order; excluded records are dropped.
pub fn build_matrix(
    log: &[EventRecord],
    labels: &LabelSet,
    profiles: &EntityProfiles,
    catalog: &[AppCatalogEntry],
) -> Result<FeatureMatrix, FeatureError> {
    let lookup = catalog_lookup(catalog);
    let mut values = Vec::new();
    let mut event_ids = Vec::new();
    let mut row_labels = Vec::new();
    let mut app_ids = Vec::new();
    for r in log {
        if r.kind != EventKind::Download {
            continue;
        }
        let label = match labels.label_of(r.event_id) {
            Some(Label::Pos) => true,
            Some(Label::Neg) => false,
            Some(Label::Excluded) | None => continue,
        };
        values.extend_from_slice(&featurize(r, profiles, &lookup)?);
        event_ids.push(r.event_id);
        row_labels.push(label);
        app_ids.push(r.app_id.clone());
    }
    Ok(FeatureMatrix {
        values,
        event_ids,
        labels: row_labels,
        columns: (0..N_FEATURES).collect(),
        app_ids: Some(app_ids),
    })
}

fn matrix_header(columns: &[usize]) -> String {
    let mut header = String::from("event_id");
    for &i in columns {
        header.push(',');
        header.push_str(FEATURES[i].name);
    }
    header.push_str(",label");
    header
}

pub fn write_matrix_csv<W: IoWrite>(out: &mut W, matrix: &FeatureMatrix) -> Result<(), FeatureError> {
    writeln!(out, "{}", matrix_header(&matrix.columns))?;
    for i in 0..matrix.n_rows() {
        let mut line = matrix.event_ids[i].to_string();
        for v in matrix.row(i) {
            line.push(',');
            // shortest roundtrip float repr keeps the CSV bit-exact
            line.push_str(&format!("{v}"));
        }
        line.push(',');
        line.push_str(if matrix.labels[i] { "pos" } else { "neg" });
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_matrix_file(path: &Path, matrix: &FeatureMatrix) -> Result<(), FeatureError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix_csv(&mut out, matrix)?;
    out.flush()?;
    Ok(())
}

/// The header names the columns: `event_id`, then any subset of registry
/// features in registry order, then `label`.
pub fn parse_matrix_csv<R: Read>(input: R) -> Result<FeatureMatrix, FeatureError> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let names: Vec<&str> = header.split(',').collect();
    if names.len() < 3 || names[0] != "event_id" || *names.last().unwrap() != "label" {
        return Err(FeatureError::Header {
            line: 1,
            expected: "event_id,<registry feature names>,label".into(),
            found: header.clone(),
        });
    }
    let mut columns = Vec::with_capacity(names.len() - 2);
    for name in &names[1..names.len() - 1] {
        let idx = feature_index(name).ok_or_else(|| FeatureError::Field {
            line: 1,
            msg: format!("unknown feature column {name:?}"),
        })?;
        if columns.last().is_some_and(|&prev| idx <= prev) {
            return Err(FeatureError::Field {
                line: 1,
                msg: format!("column {name:?} out of registry order"),
            });
        }
        columns.push(idx);
    }
    let w = columns.len();
    let mut matrix = FeatureMatrix {
        values: Vec::new(),
        event_ids: Vec::new(),
        labels: Vec::new(),
        columns,
        app_ids: None,
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != w + 2 {
            return Err(FeatureError::Field {
                line: line_no,
                msg: format!("expected {} fields, found {}", w + 2, fields.len()),
            });
        }
        let event_id: u64 = fields[0].parse().map_err(|_| FeatureError::Field {
            line: line_no,
            msg: format!("bad event_id {:?}", fields[0]),
        })?;
        matrix.event_ids.push(event_id);
        for f in &fields[1..=w] {
            let v: f64 = f.parse().map_err(|_| FeatureError::Field {
                line: line_no,
                msg: format!("bad feature value {f:?}"),
            })?;
            matrix.values.push(v);
        }
        let label = match fields[w + 1] {
            "pos" => true,
            "neg" => false,
            other => {
                return Err(FeatureError::Field {
                    line: line_no,
                    msg: format!("bad label {other:?}"),
                })
            }
        };
        matrix.labels.push(label);
    }
    Ok(matrix)
}

pub fn parse_matrix_file(path: &Path) -> Result<FeatureMatrix, FeatureError> {
    parse_matrix_csv(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_profiles;
    use crate::features::full_span;
    use crate::labeling::{build_labels, LabelParams};
    use crate::log_model::{Category, Source};

    fn record(ts: i64, kind: EventKind, device: &str, app: &str, ip: &str) -> EventRecord {
        EventRecord {
            event_id: 0,
            ts,
            kind,
            device_id: device.into(),
            vendor_verified: true,
            app_id: app.into(),
            ip_hash: ip.into(),
            source: Source::Client,
        }
    }

    fn app_entry(app_id: &str, category: Category, rating: f64, release_ts: i64) -> AppCatalogEntry {
        AppCatalogEntry { app_id: app_id.into(), category, rating, release_ts }
    }

    #[test]
    fn hand_checked_vector() {
        let base = 1_000_000;
        let log = vec![
            record(base - 200 * 3_600, EventKind::Download, "d0", "a", "ip0"),
            record(base - 100, EventKind::Search, "d0", "a", "ip0"),
            record(base, EventKind::Download, "d0", "a", "ip0"),
            record(base + 50, EventKind::Install, "d0", "a", "ip0"),
            record(base + 60, EventKind::View, "d1", "a", "ip0"),
            record(base + 70, EventKind::Download, "d1", "b", "ip0"),
        ];
        let profiles = build_profiles(&log, full_span(&log));
        let catalog = vec![
            app_entry("a", Category::Game, 4.5, base - 10 * 86_400),
            app_entry("b", Category::Tools, 3.0, base - 86_400),
        ];
        let lookup = catalog_lookup(&catalog);
        let target = &log[2];
        let v = featurize(target, &profiles, &lookup).unwrap();

        // device d0: first seen 200h earlier; search, download, and install
        // share an hour bucket, so 2 downloads over 2 active hours
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 2.0);
        assert_eq!(v[2], 1.0);
        assert_eq!(v[3], 1.0);
        assert_eq!(v[4], 1.0);
        assert_eq!(v[5], 0.0);
        assert_eq!(v[6], 1.0);
        assert_eq!(v[7], 1.0);
        // app a: released 10d ago, 2 downloads, 1 install, 1 view, 1 search
        assert_eq!(v[8], 0.0);
        assert_eq!(v[9], 2.0);
        assert_eq!(v[11], 1.0);
        assert_eq!(v[12], 1.0);
        assert_eq!(v[13], 1.0);
        assert_eq!(v[14], 1.0);
        assert_eq!(v[15], 1.0);
        assert_eq!(v[16], Category::Game.code() as f64);
        assert_eq!(v[17], 4.5);
        // ip0: 3 downloads, 2 distinct devices
        assert_eq!(v[18], 3.0);
        assert_eq!(v[20], 1.5);
    }

    #[test]
    fn new_flags_use_strict_168h_threshold() {
        let base = 10_000_000;
        let log = vec![
            record(base - NEW_THRESHOLD_SECS, EventKind::Download, "old", "a", "ip0"),
            record(base - NEW_THRESHOLD_SECS + 1, EventKind::Download, "young", "a", "ip0"),
            record(base, EventKind::Download, "old", "a", "ip0"),
            record(base, EventKind::Download, "young", "a", "ip0"),
        ];
        let profiles = build_profiles(&log, full_span(&log));
        let catalog = vec![
            app_entry("a", Category::Other, 3.0, base - NEW_THRESHOLD_SECS),
            app_entry("b", Category::Other, 3.0, base - NEW_THRESHOLD_SECS + 1),
        ];
        let lookup = catalog_lookup(&catalog);
        let old = featurize(&log[2], &profiles, &lookup).unwrap();
        let young = featurize(&log[3], &profiles, &lookup).unwrap();
        assert_eq!(old[0], 0.0, "exactly 168h is not new");
        assert_eq!(young[0], 1.0);
        assert_eq!(old[8], 0.0, "app released exactly 168h before is not new");

        let mut on_b = log[2].clone();
        on_b.app_id = "b".into();
        let v = featurize(&on_b, &profiles, &lookup).unwrap();
        assert_eq!(v[8], 1.0);
    }

    #[test]
    fn missing_device_id_zeroes_device_block() {
        let log = vec![record(100, EventKind::Download, "", "a", "ip0")];
        let profiles = build_profiles(&log, full_span(&log));
        let catalog = vec![app_entry("a", Category::Other, 3.0, 0)];
        let v = featurize(&log[0], &profiles, &catalog_lookup(&catalog)).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(&v[1..8], &[0.0; 7]);
    }

    #[test]
    fn unknown_app_errors_with_its_id() {
        let log = vec![record(100, EventKind::Download, "d0", "ghost", "ip0")];
        let profiles = build_profiles(&log, full_span(&log));
        let err = featurize(&log[0], &profiles, &catalog_lookup(&[])).unwrap_err();
        match err {
            FeatureError::UnknownApp { app_id } => assert_eq!(app_id, "ghost"),
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn select_projects_by_registry_tags() {
        let row: Vec<f64> = (0..N_FEATURES).map(|i| i as f64).collect();
        assert_eq!(select_features(&row, FeatureSet::All), row);
        assert_eq!(select_features(&row, FeatureSet::Device), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let new = select_features(&row, FeatureSet::New);
        let previous = select_features(&row, FeatureSet::Previous);
        assert_eq!(new.len() + previous.len(), N_FEATURES);
        assert_eq!(new, vec![0.0, 4.0, 5.0, 8.0, 13.0, 14.0, 15.0]);
    }

    fn tiny_labeled_matrix() -> FeatureMatrix {
        let mut log = Vec::new();
        for i in 0..6u64 {
            let mut r = record(100 + i as i64, EventKind::Download, "d0", if i < 3 { "bad" } else { "ok" }, "ip0");
            r.event_id = i;
            r.vendor_verified = i >= 3;
            log.push(r);
        }
        let labels = build_labels(&log, &LabelParams::default());
        let profiles = build_profiles(&log, full_span(&log));
        let catalog = vec![
            app_entry("bad", Category::Game, 4.7, 0),
            app_entry("ok", Category::Tools, 3.1, 0),
        ];
        build_matrix(&log, &labels, &profiles, &catalog).unwrap()
    }

    #[test]
    fn matrix_rows_follow_labels() {
        let m = tiny_labeled_matrix();
        assert_eq!(m.n_rows(), 6);
        assert_eq!(m.labels, vec![true, true, true, false, false, false]);
        assert_eq!(m.event_ids, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(m.app_ids.as_ref().unwrap()[0], "bad");
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let m = tiny_labeled_matrix();
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        let parsed = parse_matrix_csv(&buf[..]).unwrap();
        assert_eq!(parsed.values.len(), m.values.len());
        for (a, b) in m.values.iter().zip(&parsed.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(parsed.event_ids, m.event_ids);
        assert_eq!(parsed.labels, m.labels);
        assert_eq!(parsed.columns, m.columns);
        assert_eq!(parsed.app_ids, None);

        // a second write of the parsed matrix is byte-identical
        let mut buf2 = Vec::new();
        write_matrix_csv(&mut buf2, &parsed).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn projected_matrix_roundtrips_with_subset_header() {
        let m = tiny_labeled_matrix();
        let p = m.project(FeatureSet::Device).unwrap();
        assert_eq!(p.columns, FeatureSet::Device.column_indices());
        assert_eq!(p.n_rows(), m.n_rows());
        for i in 0..m.n_rows() {
            assert_eq!(p.row(i), &select_features(m.row(i), FeatureSet::Device)[..]);
        }

        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &p).unwrap();
        let header = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
        assert!(header.starts_with("event_id,is_new_device,"));
        let parsed = parse_matrix_csv(&buf[..]).unwrap();
        assert_eq!(parsed.columns, p.columns);
        assert_eq!(parsed.values, p.values);

        // projecting a device-only matrix onto the app set fails by name
        match p.project(FeatureSet::App).unwrap_err() {
            FeatureError::MissingColumn { name } => assert_eq!(name, "is_new_app"),
            other => panic!("wrong error {other:?}"),
        }
    }

    #[test]
    fn parser_rejects_shuffled_or_unknown_columns() {
        let ok = "event_id,is_new_device,label\n1,0,neg\n2,1,pos\n";
        let parsed = parse_matrix_csv(ok.as_bytes()).unwrap();
        assert_eq!(parsed.columns, vec![0]);
        assert_eq!(parsed.values, vec![0.0, 1.0]);

        let unknown = "event_id,mystery,label\n";
        assert!(matches!(
            parse_matrix_csv(unknown.as_bytes()).unwrap_err(),
            FeatureError::Field { line: 1, .. }
        ));

        let shuffled = "event_id,app_rating,is_new_device,label\n";
        assert!(matches!(
            parse_matrix_csv(shuffled.as_bytes()).unwrap_err(),
            FeatureError::Field { line: 1, .. }
        ));

        let no_label = "event_id,is_new_device\n";
        assert!(matches!(
            parse_matrix_csv(no_label.as_bytes()).unwrap_err(),
            FeatureError::Header { line: 1, .. }
        ));
    }

    #[test]
    fn subset_keeps_selected_rows() {
        let m = tiny_labeled_matrix();
        let s = m.subset(&[1, 4]);
        assert_eq!(s.n_rows(), 2);
        assert_eq!(s.event_ids, vec![1, 4]);
        assert_eq!(s.row(0), m.row(1));
        assert_eq!(s.labels, vec![true, false]);
    }

    #[test]
    fn vendor_flag_never_reaches_features() {
        let mut config = crate::SimConfig::default();
        config.n_devices = 3_000;
        config.legit_downloads = 1_500;
        config.horizon_days = 7;
        config.type2.n_downloads = 600;
        config.type3.n_workers = 40;
        let out = crate::simulator::simulate(&config).unwrap();
        let labels = build_labels(&out.records, &LabelParams::default());
        let profiles = build_profiles(&out.records, full_span(&out.records));
        let original = build_matrix(&out.records, &labels, &profiles, &out.catalog).unwrap();

        let mut flipped_log = out.records.clone();
        for r in &mut flipped_log {
            r.vendor_verified = !r.vendor_verified;
        }
        let flipped_profiles = build_profiles(&flipped_log, full_span(&flipped_log));
        let flipped = build_matrix(&flipped_log, &labels, &flipped_profiles, &out.catalog).unwrap();
        assert_eq!(original.values, flipped.values);
    }

    #[test]
    fn simulated_bot_positives_look_new() {
        let mut config = crate::SimConfig::default();
        config.n_devices = 3_000;
        config.legit_downloads = 1_200;
        config.horizon_days = 7;
        config.type2.n_downloads = 1_500;
        config.type3.n_workers = 30;
        config.type1.enabled = false;
        let out = crate::simulator::simulate(&config).unwrap();
        let labels = build_labels(&out.records, &LabelParams::default());
        let profiles = build_profiles(&out.records, full_span(&out.records));
        let m = build_matrix(&out.records, &labels, &profiles, &out.catalog).unwrap();
        let pos_rows: Vec<usize> = (0..m.n_rows()).filter(|i| m.labels[*i]).collect();
        assert!(!pos_rows.is_empty());
        let new_share = pos_rows.iter().filter(|i| m.row(**i)[0] == 1.0).count() as f64
            / pos_rows.len() as f64;
        assert!(new_share >= 0.99, "new-device share among positives {new_share}");
    }
}
