//! Traffic simulator: builds a catalog and device pool, runs the organic and
//! fraud generators on independent random streams, merge-sorts everything by
//! timestamp and assigns event ids. Identical config and seed give identical
//! output, regardless of thread count.

pub mod catalog;
pub mod diurnal;
mod legit;
mod pool;
mod type1;
mod type2;
mod type3;

pub use diurnal::{diurnal_intensity, HourSampler};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, SimConfig};
use crate::log_model::{
    AppCatalogEntry, EventKind, EventRecord, FraudType, GroundTruthEntry, Source,
};
use crate::rng::{stream_rng, Stream};
use pool::{DevicePool, TokenForge};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum DeviceRef {
    None,
    Pool(u32),
    Token(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum IpRef {
    Pool(u32),
    Token(String),
}

pub(crate) struct DraftEvent {
    pub ts: i64,
    pub kind: EventKind,
    pub device: DeviceRef,
    pub vendor_verified: bool,
    /// Catalog index; resolved to app_id at the end.
    pub app: u32,
    pub ip: IpRef,
    pub source: Source,
    pub fraud_type: FraudType,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct SimWarnings {
    /// Bot draws that wanted a fresh target when none was young enough.
    pub bot_new_app_fallback: u64,
}

/// Deterministic run summary; everything here depends only on config+seed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimReport {
    pub seed: u64,
    pub window_start_ts: i64,
    pub window_end_ts: i64,
    pub total_events: u64,
    pub download_events: u64,
    pub records_by_type: BTreeMap<String, u64>,
    pub downloads_by_type: BTreeMap<String, u64>,
    pub events_by_kind: BTreeMap<String, u64>,
    pub fraud_target_apps: Vec<String>,
    pub farm_apps: Vec<String>,
    pub crowd_task_counts: BTreeMap<String, u64>,
    pub warnings: SimWarnings,
}

pub struct SimOutput {
    pub records: Vec<EventRecord>,
    pub truth: Vec<GroundTruthEntry>,
    pub catalog: Vec<AppCatalogEntry>,
    pub report: SimReport,
}

fn type_key(t: FraudType) -> &'static str {
    match t {
        FraudType::Legit => "legit",
        FraudType::Farm => "farm",
        FraudType::Bot => "bot",
        FraudType::Crowd => "crowd",
    }
}

pub fn simulate(config: &SimConfig) -> Result<SimOutput, ConfigError> {
    config.validate()?;
    let seed = config.seed;
    let sampler = HourSampler::new(config.night_attenuation);

    let mut catalog_rng = stream_rng(seed, Stream::Catalog);
    let plan = catalog::generate_catalog(config, &mut catalog_rng);

    let mut device_forge = TokenForge::new();
    let mut ip_forge = TokenForge::new();
    let mut pool_rng = stream_rng(seed, Stream::DevicePool);
    let pool = DevicePool::generate(
        config.n_devices,
        config.legit.devices_per_ip,
        config.legit.active_device_fraction,
        config.legit.active_device_weight,
        config.legit.new_device_fraction,
        &mut device_forge,
        &mut ip_forge,
        &mut pool_rng,
    );

    // Blocks run on their own streams; the (block, seq) key below makes the
    // final order independent of how they were produced.
    let mut blocks: Vec<Vec<DraftEvent>> = Vec::new();

    let mut legit_rng = stream_rng(seed, Stream::LegitTraffic);
    blocks.push(legit::generate_legit(config, &plan, &pool, &sampler, &mut legit_rng));

    let mut warnings = SimWarnings::default();
    let mut crowd_task_counts = BTreeMap::new();
    let mut worker_devices = Vec::new();
    if config.type3.enabled {
        let mut crowd_rng = stream_rng(seed, Stream::Crowd);
        let crowd = type3::generate_crowd(config, &plan, &pool, &sampler, &mut crowd_rng);
        crowd_task_counts = crowd.task_counts;
        worker_devices = crowd.worker_devices;
        blocks.push(crowd.events);
    }

    if config.type2.enabled {
        let mut bot_rng = stream_rng(seed, Stream::Bots);
        let bots = type2::generate_bots(config, &plan, &pool, &sampler, &mut device_forge, &mut bot_rng);
        warnings.bot_new_app_fallback = bots.new_app_fallbacks;
        blocks.push(bots.events);
    }

    if config.type1.enabled {
        for (i, farm) in config.type1.farms.iter().enumerate() {
            let mut farm_rng = stream_rng(seed, Stream::Farm(i as u32));
            blocks.push(type1::generate_farm(
                farm,
                plan.farm_indices[i],
                (config.start_ts, config.window_end_ts()),
                &mut device_forge,
                &mut ip_forge,
                &mut farm_rng,
            ));
        }
    }

    // Background history exists for every established device seen in
    // foreground traffic, so device first-seen reflects ownership age rather
    // than the first download.
    let mut foreground = vec![false; pool.len()];
    for block in &blocks {
        for e in block {
            if let DeviceRef::Pool(d) = e.device {
                foreground[d as usize] = true;
            }
        }
    }
    for &d in &worker_devices {
        foreground[d as usize] = true;
    }
    let foreground_devices: Vec<u32> =
        (0..pool.len() as u32).filter(|d| foreground[*d as usize]).collect();
    let mut update_rng = stream_rng(seed, Stream::BackgroundUpdates);
    blocks.push(legit::generate_background_updates(
        config,
        &plan,
        &pool,
        &foreground_devices,
        &sampler,
        &mut update_rng,
    ));

    let mut drafts: Vec<(i64, u32, u32, DraftEvent)> = Vec::with_capacity(blocks.iter().map(Vec::len).sum());
    for (block_id, block) in blocks.into_iter().enumerate() {
        for (seq, e) in block.into_iter().enumerate() {
            drafts.push((e.ts, block_id as u32, seq as u32, e));
        }
    }
    drafts.sort_by_key(|(ts, block, seq, _)| (*ts, *block, *seq));

    let mut records = Vec::with_capacity(drafts.len());
    let mut truth = Vec::with_capacity(drafts.len());
    let mut records_by_type: BTreeMap<String, u64> = BTreeMap::new();
    let mut downloads_by_type: BTreeMap<String, u64> = BTreeMap::new();
    let mut events_by_kind: BTreeMap<String, u64> = BTreeMap::new();
    for (event_id, (_, _, _, e)) in drafts.into_iter().enumerate() {
        let device_id = match &e.device {
            DeviceRef::None => String::new(),
            DeviceRef::Pool(d) => pool.device_tokens[*d as usize].clone(),
            DeviceRef::Token(t) => t.clone(),
        };
        let ip_hash = match &e.ip {
            IpRef::Pool(i) => pool.ip_tokens[*i as usize].clone(),
            IpRef::Token(t) => t.clone(),
        };
        *records_by_type.entry(type_key(e.fraud_type).into()).or_insert(0) += 1;
        *events_by_kind.entry(e.kind.as_str().into()).or_insert(0) += 1;
        if e.kind == EventKind::Download {
            *downloads_by_type.entry(type_key(e.fraud_type).into()).or_insert(0) += 1;
        }
        records.push(EventRecord {
            event_id: event_id as u64,
            ts: e.ts,
            kind: e.kind,
            device_id,
            vendor_verified: e.vendor_verified,
            app_id: plan.entries[e.app as usize].app_id.clone(),
            ip_hash,
            source: e.source,
        });
        truth.push(GroundTruthEntry { event_id: event_id as u64, fraud_type: e.fraud_type });
    }

    let report = SimReport {
        seed,
        window_start_ts: config.start_ts,
        window_end_ts: config.window_end_ts(),
        total_events: records.len() as u64,
        download_events: records.iter().filter(|r| r.kind == EventKind::Download).count() as u64,
        records_by_type,
        downloads_by_type,
        events_by_kind,
        fraud_target_apps: plan
            .target_indices
            .iter()
            .map(|i| plan.entries[*i as usize].app_id.clone())
            .collect(),
        farm_apps: plan
            .farm_indices
            .iter()
            .map(|i| plan.entries[*i as usize].app_id.clone())
            .collect(),
        crowd_task_counts,
        warnings,
    };

    Ok(SimOutput { records, truth, catalog: plan.entries, report })
}
