//! Acceptance gate for the assembled pipeline: one test per promised
//! behavior, numbered to match the project contract. Heavy fixtures are
//! shared through lazies so the gate stays inside a few minutes.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fraudlab_core::ablation::{app_disjoint_split, run_ablation, EvalReport, SplitParams};
use fraudlab_core::analysis::{
    coefficient_of_variation, comparative_analysis, AnalysisReport, RATING_BIN_LABELS,
};
use fraudlab_core::config::{DeviceIdMode, FarmProfile, SimConfig, SourceMode};
use fraudlab_core::features::{
    build_matrix, build_profiles, full_span, FeatureMatrix, FeatureSet, ALL_FEATURE_SETS,
};
use fraudlab_core::labeling::{build_labels, AppStatus, LabelParams, Label};
use fraudlab_core::log_model::{EventKind, EventRecord, FraudType, Source};
use fraudlab_core::metrics::auc;
use fraudlab_core::rule_filter::{type1_rule_filter, FilterParams};
use fraudlab_core::simulator::simulate;
use fraudlab_core::trees::{
    gini_importance, gini_impurity, train, train_with_trace, Dataset, ImportanceParams,
    ImportanceReport, TrainParams,
};

// ---------------------------------------------------------------------------
// shared fixtures

struct SeedRun {
    download_events: u64,
    n_rows: usize,
    n_pos: usize,
    device_precision: f64,
    app_precision: f64,
    importance: ImportanceReport,
    /// Five-set ablation; only the default seed carries it.
    full_eval: Option<EvalReport>,
    /// Wall-clock seconds for simulate + label + featurize + ablate.
    pipeline_secs: f64,
    analysis: Option<AnalysisReport>,
    crowd_auc: Option<f64>,
}

fn precision_of(eval: &EvalReport, set: FeatureSet) -> f64 {
    let row = eval.rows.iter().find(|r| r.set == set).expect("set evaluated");
    row.metrics.precision.value().expect("defined precision")
}

fn seed_run(seed: u64, full: bool) -> SeedRun {
    let t0 = Instant::now();
    let config = SimConfig { seed, ..SimConfig::default() };
    let sim = simulate(&config).expect("default config simulates");
    let labels = build_labels(&sim.records, &LabelParams::default());
    let profiles = build_profiles(&sim.records, full_span(&sim.records));
    let matrix =
        build_matrix(&sim.records, &labels, &profiles, &sim.catalog).expect("featurize");

    let split_params = SplitParams { seed, ..SplitParams::default() };
    let train_params = TrainParams { seed, ..TrainParams::default() };
    let (train_m, test_m, split) =
        app_disjoint_split(&matrix, &split_params).expect("split");
    let sets: &[FeatureSet] =
        if full { &ALL_FEATURE_SETS } else { &[FeatureSet::Device, FeatureSet::App] };
    let eval = run_ablation(&train_m, &test_m, &split, sets, &train_params).expect("ablate");
    let pipeline_secs = t0.elapsed().as_secs_f64();

    let names = matrix.column_names();
    let data = Dataset {
        values: &matrix.values,
        n_cols: matrix.n_cols(),
        labels: &matrix.labels,
        feature_names: &names,
    };
    let importance = ImportanceReport::new(
        &names,
        &gini_importance(&data, &ImportanceParams { seed, ..ImportanceParams::default() })
            .expect("importance"),
    );

    let analysis =
        full.then(|| comparative_analysis(&sim.records, &sim.catalog, &labels).expect("analysis"));
    let crowd_auc = full.then(|| crowd_vs_legit_auc(&sim.truth, &matrix, seed));

    SeedRun {
        download_events: sim.report.download_events,
        n_rows: matrix.n_rows(),
        n_pos: matrix.labels.iter().filter(|y| **y).count(),
        device_precision: precision_of(&eval, FeatureSet::Device),
        app_precision: precision_of(&eval, FeatureSet::App),
        importance,
        full_eval: full.then_some(eval),
        pipeline_secs,
        analysis,
        crowd_auc,
    }
}

/// Ground-truth task: score type-3 downloads against organic ones on the
/// full feature vectors, app-disjoint, and return the test AUC.
fn crowd_vs_legit_auc(
    truth: &[fraudlab_core::log_model::GroundTruthEntry],
    matrix: &FeatureMatrix,
    seed: u64,
) -> f64 {
    let type_of: HashMap<u64, FraudType> =
        truth.iter().map(|t| (t.event_id, t.fraud_type)).collect();
    let keep: Vec<usize> = (0..matrix.n_rows())
        .filter(|i| {
            matches!(type_of[&matrix.event_ids[*i]], FraudType::Crowd | FraudType::Legit)
        })
        .collect();
    let mut sub = matrix.subset(&keep);
    sub.labels = sub
        .event_ids
        .iter()
        .map(|id| type_of[id] == FraudType::Crowd)
        .collect();

    let (train_m, test_m, _) = app_disjoint_split(&sub, &SplitParams { seed, ..SplitParams::default() })
        .expect("crowd split");
    let names = train_m.column_names();
    let data = Dataset {
        values: &train_m.values,
        n_cols: train_m.n_cols(),
        labels: &train_m.labels,
        feature_names: &names,
    };
    let model = train(&data, &TrainParams { seed, ..TrainParams::default() }).expect("crowd train");
    let scores = model.predict_batch(&test_m.values).expect("crowd scores");
    auc(&scores, &test_m.labels).expect("crowd auc")
}

const EXTRA_SEEDS: [u64; 2] = [4242, 20240];

static DEFAULT_RUN: Lazy<SeedRun> = Lazy::new(|| seed_run(SimConfig::default().seed, true));
static EXTRA_RUNS: Lazy<Vec<SeedRun>> =
    Lazy::new(|| EXTRA_SEEDS.iter().map(|s| seed_run(*s, false)).collect());

fn all_runs() -> Vec<&'static SeedRun> {
    let mut runs = vec![&*DEFAULT_RUN];
    runs.extend(EXTRA_RUNS.iter());
    runs
}

// ---------------------------------------------------------------------------
// 1. end-to-end detection quality on the default config

#[test]
fn criterion_1_default_run_detection_quality() {
    let run = &*DEFAULT_RUN;
    assert!(
        (80_000..=120_000).contains(&run.download_events),
        "download volume {} outside the expected band",
        run.download_events
    );
    let pos = run.n_pos as f64;
    let neg = (run.n_rows - run.n_pos) as f64;
    let ratio = pos / neg;
    assert!(
        (1.0 / 12.0..=1.0 / 6.0).contains(&ratio),
        "positive:negative = 1:{:.1}, expected about 1:9",
        1.0 / ratio
    );

    let eval = run.full_eval.as_ref().unwrap();
    let all = eval.rows.iter().find(|r| r.set == FeatureSet::All).unwrap();
    for (name, metric) in [
        ("precision", &all.metrics.precision),
        ("recall", &all.metrics.recall),
        ("f1", &all.metrics.f1),
        ("accuracy", &all.metrics.accuracy),
    ] {
        let v = metric.value().unwrap_or(0.0);
        assert!(v >= 0.95, "all-features {name} = {v:.4} < 0.95");
    }
    assert!(all.auc >= 0.98, "all-features auc = {:.4} < 0.98", all.auc);

    assert!(eval.split.n_train_apps > 0 && eval.split.n_test_apps > 0);
    assert!(
        run.pipeline_secs < 300.0,
        "default pipeline took {:.0}s, promised under 5 minutes",
        run.pipeline_secs
    );
}

// ---------------------------------------------------------------------------
// 2. ablation ordering

#[test]
fn criterion_2_feature_set_ordering() {
    let eval = DEFAULT_RUN.full_eval.as_ref().unwrap();
    let f1_of = |set: FeatureSet| {
        eval.rows
            .iter()
            .find(|r| r.set == set)
            .unwrap()
            .metrics
            .f1
            .value()
            .unwrap_or(0.0)
    };
    let all_f1 = f1_of(FeatureSet::All);
    for set in [FeatureSet::Device, FeatureSet::App, FeatureSet::New, FeatureSet::Previous] {
        let f1 = f1_of(set);
        assert!(
            all_f1 >= f1 - 0.005,
            "all-features f1 {all_f1:.4} trails {set:?} f1 {f1:.4}"
        );
    }

    let wins = all_runs()
        .iter()
        .filter(|r| r.device_precision < r.app_precision)
        .count();
    assert!(
        wins * 2 > all_runs().len(),
        "device precision < app precision held on {wins}/{} seeds",
        all_runs().len()
    );
}

// ---------------------------------------------------------------------------
// 3. importance ranking

#[test]
fn criterion_3_importance_ranking() {
    let good = all_runs()
        .iter()
        .filter(|r| {
            let imp = &r.importance;
            imp.rank_of("is_new_device") == Some(1)
                && imp.rank_of("app_rating").is_some_and(|k| k <= 5)
                && imp.rank_of("app_category").is_some_and(|k| k <= 5)
        })
        .count();
    let detail: Vec<(Option<usize>, Option<usize>, Option<usize>)> = all_runs()
        .iter()
        .map(|r| {
            (
                r.importance.rank_of("is_new_device"),
                r.importance.rank_of("app_rating"),
                r.importance.rank_of("app_category"),
            )
        })
        .collect();
    assert!(
        good * 2 > all_runs().len(),
        "importance ranking held on {good}/{} seeds; (new_device, rating, category) ranks: {detail:?}",
        all_runs().len()
    );
}

// ---------------------------------------------------------------------------
// 4. comparative distributions

#[test]
fn criterion_4_comparative_distributions() {
    let report = DEFAULT_RUN.analysis.as_ref().unwrap();

    let share = |which: fn(&fraudlab_core::analysis::CategoryRow) -> f64| {
        report
            .category
            .iter()
            .filter(|r| r.category == "finance" || r.category == "game")
            .map(which)
            .sum::<f64>()
    };
    let suspicious_share = share(|r| r.suspicious_share);
    let all_share = share(|r| r.all_share);
    assert!(
        suspicious_share > 0.5,
        "finance+game among suspicious apps = {suspicious_share:.3}, expected > 0.5"
    );
    assert!(
        all_share <= 0.2,
        "finance+game among all apps = {all_share:.3}, expected <= 0.2"
    );

    let mode = |hist: &[f64; 4]| {
        (0..4).max_by(|a, b| hist[*a].partial_cmp(&hist[*b]).unwrap()).unwrap()
    };
    let sus_mode = mode(&report.rating.suspicious);
    let normal_mode = mode(&report.rating.normal);
    assert_eq!(
        RATING_BIN_LABELS[sus_mode], "[4,5]",
        "suspicious rating mode bin is {}",
        RATING_BIN_LABELS[sus_mode]
    );
    assert!(
        normal_mode == 1 || normal_mode == 2,
        "normal rating mode bin is {}",
        RATING_BIN_LABELS[normal_mode]
    );

    let cv_pos = coefficient_of_variation(&report.hourly.positive);
    let cv_neg = coefficient_of_variation(&report.hourly.negative);
    assert!(
        cv_pos < cv_neg,
        "hourly variation: positive {cv_pos:.3} should be steadier than negative {cv_neg:.3}"
    );
}

// ---------------------------------------------------------------------------
// 5. type-1 rule filter against ground truth

#[test]
fn criterion_5_rule_filter_catches_farms_exactly() {
    let mut config = SimConfig::default();
    config.seed = 7;
    config.horizon_days = 14;
    config.n_devices = 30_000;
    config.legit_downloads = 10_000;
    config.type2.enabled = false;
    config.type3.enabled = false;
    config.type1.farms = vec![
        FarmProfile {
            n_downloads: 2_000,
            source_mode: SourceMode::Portal,
            device_id_mode: DeviceIdMode::None,
            duration_hours: 24.0,
            distinct_ips: true,
        },
        FarmProfile {
            n_downloads: 6_000,
            source_mode: SourceMode::Update,
            device_id_mode: DeviceIdMode::Normal,
            duration_hours: 2.0,
            distinct_ips: true,
        },
        FarmProfile {
            n_downloads: 1_500,
            source_mode: SourceMode::Null,
            device_id_mode: DeviceIdMode::Abnormal,
            duration_hours: 1.0,
            distinct_ips: true,
        },
    ];
    let out = simulate(&config).expect("type-1-only config simulates");

    let farm: std::collections::HashSet<u64> = out
        .truth
        .iter()
        .filter(|t| t.fraud_type == FraudType::Farm)
        .map(|t| t.event_id)
        .collect();
    let hits = type1_rule_filter(&out.records, &FilterParams::default());
    let flagged: std::collections::HashSet<u64> = hits.iter().map(|h| h.event_id).collect();

    let false_positives: Vec<u64> = flagged.difference(&farm).copied().collect();
    assert!(
        false_positives.is_empty(),
        "filter precision must be 1.0; flagged {} legit records",
        false_positives.len()
    );
    let recall = flagged.intersection(&farm).count() as f64 / farm.len() as f64;
    assert!(recall >= 0.99, "filter recall = {recall:.4} < 0.99");
}

// ---------------------------------------------------------------------------
// 6. type-3 records are indistinguishable from organic ones

#[test]
fn criterion_6_crowd_traffic_indistinguishable() {
    let auc = DEFAULT_RUN.crowd_auc.unwrap();
    assert!(
        (0.4..=0.6).contains(&auc),
        "crowd-vs-legit auc = {auc:.4}, expected within [0.4, 0.6]"
    );
}

// ---------------------------------------------------------------------------
// 7. oracle suites

#[test]
fn criterion_7_auc_matches_pairwise_oracle() {
    fn pairwise(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0u64;
        let mut pairs = 0u64;
        for (i, yi) in labels.iter().enumerate() {
            if !yi {
                continue;
            }
            for (j, yj) in labels.iter().enumerate() {
                if *yj {
                    continue;
                }
                pairs += 2;
                num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
        num as f64 / pairs as f64
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x0a0c);
    for case in 0..60 {
        let n = rng.gen_range(2..=200);
        let lattice: bool = rng.gen();
        let mut scores = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            scores.push(if lattice {
                rng.gen_range(0..=16) as f64 / 16.0
            } else {
                rng.gen::<f64>()
            });
            labels.push(rng.gen_bool(0.4));
        }
        if labels.iter().all(|y| *y) || labels.iter().all(|y| !*y) {
            continue;
        }
        let fast = auc(&scores, &labels).unwrap();
        let slow = pairwise(&scores, &labels);
        assert_eq!(
            fast.to_bits(),
            slow.to_bits(),
            "case {case}: rank auc {fast} != pairwise {slow}"
        );
    }
}

#[test]
fn criterion_7_split_choice_matches_exhaustive_enumeration() {
    fn tie_margin(a: f64, b: f64) -> f64 {
        1e-12 * a.abs().max(b.abs()).max(1.0)
    }

    // Enumerates every (feature, midpoint) candidate over the node's rows with
    // the pinned accumulation orders: totals in ascending row order, prefixes
    // in (value, row) order.
    fn oracle(
        values: &[f64],
        n_cols: usize,
        trace: &fraudlab_core::trees::NodeTrace,
    ) -> Option<(u32, f64, f64)> {
        let lambda = trace.lambda_l2;
        let g_tot: f64 = trace.grad.iter().sum();
        let h_tot: f64 = trace.hess.iter().sum();
        let parent = g_tot * g_tot / (h_tot + lambda);
        let mut best: Option<(u32, f64, f64)> = None;
        for j in 0..n_cols {
            let value = |k: usize| values[trace.rows[k] as usize * n_cols + j];
            let mut order: Vec<usize> = (0..trace.rows.len()).collect();
            order.sort_by(|a, b| {
                value(*a)
                    .partial_cmp(&value(*b))
                    .unwrap()
                    .then(trace.rows[*a].cmp(&trace.rows[*b]))
            });
            let mut acc_g = 0.0;
            let mut acc_h = 0.0;
            let mut prev: Option<f64> = None;
            for &k in &order {
                let v = value(k);
                if let Some(pv) = prev {
                    if v > pv {
                        let (gl, hl) = (acc_g, acc_h);
                        let (gr, hr) = (g_tot - gl, h_tot - hl);
                        if hl >= trace.min_child_weight && hr >= trace.min_child_weight {
                            let gain = 0.5
                                * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
                            let better = match best {
                                None => gain > 0.0,
                                Some((_, _, bg)) => gain > bg + tie_margin(gain, bg),
                            };
                            if better {
                                best = Some((j as u32, 0.5 * (pv + v), gain));
                            }
                        }
                    }
                }
                acc_g += trace.grad[k];
                acc_h += trace.hess[k];
                prev = Some(v);
            }
        }
        best
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5e11);
    for case in 0..12 {
        let n = rng.gen_range(8..=50);
        let d = rng.gen_range(1..=3);
        let lattice: bool = rng.gen();
        let mut values = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..d {
                values.push(if lattice {
                    rng.gen_range(0..5) as f64
                } else {
                    rng.gen::<f64>()
                });
            }
            labels.push(rng.gen_bool(0.5));
        }
        if labels.iter().all(|y| *y) || labels.iter().all(|y| !*y) {
            continue;
        }
        let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        let data = Dataset { values: &values, n_cols: d, labels: &labels, feature_names: &names };
        let params = TrainParams {
            n_trees: 3,
            max_depth: 3,
            learning_rate: 0.3,
            min_child_weight: if case % 2 == 0 { 0.0 } else { 1.5 },
            ..TrainParams::default()
        };
        let (_, traces) = train_with_trace(&data, &params).unwrap();
        assert!(!traces.is_empty());
        for trace in &traces {
            let want = oracle(&values, d, trace);
            match (&trace.chosen, &want) {
                (None, None) => {}
                (Some(c), Some((f, t, g))) => {
                    assert_eq!(c.feature, *f, "case {case}: feature");
                    assert_eq!(c.threshold.to_bits(), t.to_bits(), "case {case}: threshold");
                    assert_eq!(c.gain.to_bits(), g.to_bits(), "case {case}: gain");
                }
                other => panic!("case {case}: trainer vs oracle disagree on splitability: {other:?}"),
            }
        }
    }
}

#[test]
fn criterion_7_labeling_matches_naive_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1abe1);
    for _ in 0..20 {
        let n = rng.gen_range(2..=1000);
        let mut log = Vec::with_capacity(n);
        for i in 0..n {
            let kind = match rng.gen_range(0..10) {
                0..=5 => EventKind::Download,
                6 => EventKind::Search,
                7 => EventKind::View,
                8 => EventKind::Install,
                _ => EventKind::Update,
            };
            let app = rng.gen_range(0..12);
            // per-app vendor bias spreads apps across the three status bands
            let vendor = rng.gen_range(0.0..1.0) > (app as f64) / 14.0;
            log.push(EventRecord {
                event_id: i as u64,
                ts: rng.gen_range(0..1_000_000),
                kind,
                device_id: "00112233aabbccdd".into(),
                vendor_verified: vendor,
                app_id: format!("app_{app}"),
                ip_hash: "ffeeddccbbaa9988".into(),
                source: if kind == EventKind::Update { Source::Update } else { Source::Client },
            });
        }
        let labels = build_labels(&log, &LabelParams::default());

        let mut nv: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for r in &log {
            if r.kind == EventKind::Download {
                let e = nv.entry(r.app_id.as_str()).or_default();
                e.0 += u64::from(!r.vendor_verified);
                e.1 += 1;
            }
        }
        for (app, (non_vendor, total)) in &nv {
            let want = if non_vendor * 2 > *total {
                AppStatus::Suspicious
            } else if *non_vendor == 0 {
                AppStatus::Normal
            } else {
                AppStatus::Excluded
            };
            assert_eq!(labels.app_status.get(*app), Some(&want), "app {app}");
        }
        assert_eq!(labels.app_status.len(), nv.len());

        for r in &log {
            let got = labels.label_of(r.event_id);
            if r.kind != EventKind::Download {
                assert_eq!(got, None);
                continue;
            }
            let want = match nv[r.app_id.as_str()] {
                (non_vendor, total) if non_vendor * 2 > total => Label::Pos,
                (0, _) => Label::Neg,
                _ => Label::Excluded,
            };
            assert_eq!(got, Some(want), "event {}", r.event_id);
        }
    }
}

#[test]
fn criterion_7_gini_matches_direct_definition() {
    for pos in 0..=60u64 {
        for neg in 0..=60u64 {
            if pos + neg == 0 {
                continue;
            }
            let p = pos as f64 / (pos + neg) as f64;
            let q = neg as f64 / (pos + neg) as f64;
            let direct = 1.0 - p * p - q * q;
            assert_eq!(gini_impurity(pos, neg).unwrap().to_bits(), direct.to_bits());
        }
    }
    assert_eq!(gini_impurity(2, 2).unwrap(), 0.5);
    assert_eq!(gini_impurity(1, 3).unwrap(), 0.375);
    assert_eq!(gini_impurity(7, 0).unwrap(), 0.0);
}

// ---------------------------------------------------------------------------
// 8. byte-level determinism of the shipped binary at any thread count

const PIPELINE_CONFIG: &str = "\
seed = 11
horizon_days = 10
n_apps = 60
n_devices = 20000
legit_downloads = 9000

[type2]
n_downloads = 700

[type3]
n_workers = 40
";

const ABLATE_CONFIG: &str = "\
[train]
n_trees = 40
";

fn run_cmd(root: &Path, threads: usize, args: &[&str]) {
    let binary = env!("CARGO_BIN_EXE_fraudlab");
    let output = Command::new(binary)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .current_dir(root)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "fraudlab {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
}

fn run_pipeline(root: &Path, threads: usize) {
    std::fs::write(root.join("sim.toml"), PIPELINE_CONFIG).unwrap();
    std::fs::write(root.join("ablate.toml"), ABLATE_CONFIG).unwrap();
    run_cmd(root, threads, &["simulate", "-c", "sim.toml", "-o", "sim"]);
    run_cmd(root, threads, &["label", "--log", "sim/events.csv", "-o", "labels"]);
    run_cmd(
        root,
        threads,
        &[
            "featurize",
            "--log",
            "sim/events.csv",
            "--catalog",
            "sim/catalog.csv",
            "--labels",
            "labels",
            "-o",
            "feat",
        ],
    );
    run_cmd(
        root,
        threads,
        &["train", "--matrix", "feat/matrix.csv", "--n-trees", "40", "-o", "model"],
    );
    run_cmd(
        root,
        threads,
        &[
            "evaluate",
            "--model",
            "model/model.json",
            "--matrix",
            "feat/matrix.csv",
            "-o",
            "eval",
        ],
    );
    run_cmd(
        root,
        threads,
        &[
            "ablate",
            "--log",
            "sim/events.csv",
            "--catalog",
            "sim/catalog.csv",
            "-c",
            "ablate.toml",
            "-o",
            "ablate",
        ],
    );
    run_cmd(
        root,
        threads,
        &[
            "analyze",
            "--log",
            "sim/events.csv",
            "--catalog",
            "sim/catalog.csv",
            "--labels",
            "labels",
            "-o",
            "analysis",
        ],
    );
    run_cmd(root, threads, &["filter-type1", "--log", "sim/events.csv", "-o", "filter"]);
    run_cmd(
        root,
        threads,
        &[
            "importance",
            "--matrix",
            "feat/matrix.csv",
            "--n-trees",
            "10",
            "--max-depth",
            "8",
            "-o",
            "imp",
        ],
    );
}

/// Every produced file except the volatile timing reports.
fn artifact_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else if path.file_name().unwrap() != "timings.json" {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn criterion_8_pipeline_is_byte_identical_across_runs_and_threads() {
    let base = tempfile::tempdir().unwrap();
    let variants = [("a", 1), ("b", 1), ("c", 4)];
    for (name, threads) in variants {
        let root = base.path().join(name);
        std::fs::create_dir(&root).unwrap();
        run_pipeline(&root, threads);
    }
    let reference = artifact_files(&base.path().join("a"));
    assert!(reference.len() > 15, "pipeline produced only {} files", reference.len());
    for (name, _) in &variants[1..] {
        let got = artifact_files(&base.path().join(name));
        let keys: Vec<_> = reference.keys().collect();
        let got_keys: Vec<_> = got.keys().collect();
        assert_eq!(keys, got_keys, "variant {name} produced a different file set");
        for (path, bytes) in &reference {
            assert_eq!(
                bytes,
                &got[path],
                "variant {name}: {} differs between runs",
                path.display()
            );
        }
    }
}
