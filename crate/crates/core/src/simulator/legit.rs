//! Organic traffic: diurnal downloads with search/view preludes and installs,
//! plus the background auto-update stream that gives established devices
//! their in-window history.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::SimConfig;
use crate::log_model::{EventKind, FraudType, Source};
use crate::simulator::catalog::CatalogPlan;
use crate::simulator::diurnal::HourSampler;
use crate::simulator::pool::DevicePool;
use crate::simulator::{DeviceRef, DraftEvent, IpRef};

pub(crate) fn diurnal_ts(config: &SimConfig, sampler: &HourSampler, rng: &mut ChaCha8Rng) -> i64 {
    let day = rng.gen_range(0..i64::from(config.horizon_days));
    let second = (sampler.sample(rng) * 3600.0) as i64;
    config.start_ts + day * 86_400 + second.min(86_399)
}

fn pool_event(
    ts: i64,
    kind: EventKind,
    device: u32,
    app: u32,
    pool: &DevicePool,
    fraud_type: FraudType,
) -> DraftEvent {
    DraftEvent {
        ts,
        kind,
        device: DeviceRef::Pool(device),
        vendor_verified: true,
        app,
        ip: IpRef::Pool(pool.device_ip[device as usize]),
        source: Source::Client,
        fraud_type,
    }
}

/// Emits one download with its optional prelude/install, sharing device and
/// ip. Used verbatim by crowd workers so their records have the same shape.
#[allow(clippy::too_many_arguments)]
pub(crate) fn download_with_context(
    config: &SimConfig,
    ts: i64,
    device: u32,
    app: u32,
    pool: &DevicePool,
    fraud_type: FraudType,
    force_install: bool,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<DraftEvent>,
) {
    let start = config.start_ts;
    let end = config.window_end_ts();
    let l = &config.legit;
    if rng.gen::<f64>() < l.p_search_before {
        let t = (ts - rng.gen_range(10..=300)).max(start);
        out.push(pool_event(t, EventKind::Search, device, app, pool, fraud_type));
    }
    if rng.gen::<f64>() < l.p_view_before {
        let t = (ts - rng.gen_range(5..=120)).max(start);
        out.push(pool_event(t, EventKind::View, device, app, pool, fraud_type));
    }
    out.push(pool_event(ts, EventKind::Download, device, app, pool, fraud_type));
    if force_install || rng.gen::<f64>() < l.p_install_after {
        let t = (ts + rng.gen_range(30..=600)).min(end - 1);
        out.push(pool_event(t, EventKind::Install, device, app, pool, fraud_type));
    }
}

pub(crate) fn generate_legit(
    config: &SimConfig,
    plan: &CatalogPlan,
    pool: &DevicePool,
    sampler: &HourSampler,
    rng: &mut ChaCha8Rng,
) -> Vec<DraftEvent> {
    let mut out = Vec::with_capacity(config.legit_downloads as usize * 3);
    for _ in 0..config.legit_downloads {
        let ts = diurnal_ts(config, sampler, rng);
        let device = pool.sample_download_device(rng);
        let app = plan.sample_released_app(rng, ts);
        download_with_context(config, ts, device, app, pool, FraudType::Legit, false, rng, &mut out);
    }
    out
}

/// Auto-update pings for established devices that showed up in foreground
/// traffic. Devices nobody downloads with would never reach a feature row or
/// a label, so their pings are not materialized.
pub(crate) fn generate_background_updates(
    config: &SimConfig,
    plan: &CatalogPlan,
    pool: &DevicePool,
    foreground_devices: &[u32],
    sampler: &HourSampler,
    rng: &mut ChaCha8Rng,
) -> Vec<DraftEvent> {
    let lambda = config.legit.updates_per_device_day * f64::from(config.horizon_days);
    if lambda <= 0.0 {
        return Vec::new();
    }
    let poisson = Poisson::new(lambda).unwrap();
    let mut out = Vec::new();
    for &device in foreground_devices {
        if !pool.has_background[device as usize] {
            continue;
        }
        let n = poisson.sample(rng) as u64;
        for _ in 0..n {
            let ts = diurnal_ts(config, sampler, rng);
            let app = plan.sample_released_app(rng, ts);
            out.push(DraftEvent {
                ts,
                kind: EventKind::Update,
                device: DeviceRef::Pool(device),
                vendor_verified: true,
                app,
                ip: IpRef::Pool(pool.device_ip[device as usize]),
                source: Source::Update,
                fraud_type: FraudType::Legit,
            });
        }
    }
    out
}
