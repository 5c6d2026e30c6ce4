//! Download bots: steady round-the-clock traffic against promoted apps,
//! resetting the device identity after every download and riding residential
//! NAT addresses, with search/view preludes imitating a real session.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::SimConfig;
use crate::log_model::{EventKind, FraudType, Source};
use crate::simulator::catalog::CatalogPlan;
use crate::simulator::diurnal::HourSampler;
use crate::simulator::legit::diurnal_ts;
use crate::simulator::pool::{DevicePool, TokenForge};
use crate::simulator::{DeviceRef, DraftEvent, IpRef};

const NEW_APP_SECS: i64 = 168 * 3_600;

pub(crate) struct BotOutput {
    pub events: Vec<DraftEvent>,
    pub new_app_fallbacks: u64,
}

pub(crate) fn generate_bots(
    config: &SimConfig,
    plan: &CatalogPlan,
    pool: &DevicePool,
    sampler: &HourSampler,
    device_forge: &mut TokenForge,
    rng: &mut ChaCha8Rng,
) -> BotOutput {
    let bot = &config.type2;
    let targets: Vec<(u32, i64)> = plan
        .target_indices
        .iter()
        .map(|i| (*i, plan.entries[*i as usize].release_ts))
        .collect();
    let start = config.start_ts;
    let horizon = i64::from(config.horizon_days) * 86_400;
    let n_ips = pool.ip_tokens.len() as u32;

    let stable_device = if bot.reset_device_per_download {
        None
    } else {
        Some(device_forge.fresh(rng))
    };

    let mut out = Vec::with_capacity(bot.n_downloads as usize * 3);
    let mut fallbacks = 0u64;
    for _ in 0..bot.n_downloads {
        let ts = if bot.steady_traffic {
            start + rng.gen_range(0..horizon)
        } else {
            diurnal_ts(config, sampler, rng)
        };

        let released: Vec<(u32, i64)> = targets.iter().copied().filter(|(_, r)| *r <= ts).collect();
        // Config validation guarantees targets exist; catalog generation
        // guarantees some release before the window opens.
        let app = if rng.gen::<f64>() < bot.target_new_apps_fraction {
            let fresh: Vec<u32> = released
                .iter()
                .filter(|(_, r)| ts - *r < NEW_APP_SECS)
                .map(|(i, _)| *i)
                .collect();
            if fresh.is_empty() {
                fallbacks += 1;
                // Youngest released target; ties break to the lower index.
                released.iter().max_by_key(|(i, r)| (*r, std::cmp::Reverse(*i))).unwrap().0
            } else {
                fresh[rng.gen_range(0..fresh.len())]
            }
        } else {
            released[rng.gen_range(0..released.len())].0
        };

        let device = match &stable_device {
            Some(token) => DeviceRef::Token(token.clone()),
            None => DeviceRef::Token(device_forge.fresh(rng)),
        };
        let ip = IpRef::Pool(rng.gen_range(0..n_ips));

        if rng.gen::<f64>() < bot.p_search_before {
            let t = (ts - rng.gen_range(10..=300)).max(start);
            out.push(bot_event(t, EventKind::Search, &device, app, &ip));
        }
        if rng.gen::<f64>() < bot.p_view_before {
            let t = (ts - rng.gen_range(5..=120)).max(start);
            out.push(bot_event(t, EventKind::View, &device, app, &ip));
        }
        out.push(bot_event(ts, EventKind::Download, &device, app, &ip));
    }
    BotOutput { events: out, new_app_fallbacks: fallbacks }
}

fn bot_event(ts: i64, kind: EventKind, device: &DeviceRef, app: u32, ip: &IpRef) -> DraftEvent {
    DraftEvent {
        ts,
        kind,
        device: device.clone(),
        vendor_verified: false,
        app,
        ip: ip.clone(),
        source: Source::Client,
        fraud_type: FraudType::Bot,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use std::collections::HashSet;

    fn small_config(n_downloads: u64) -> SimConfig {
        let mut config = SimConfig::default();
        config.n_devices = 3_000;
        config.legit_downloads = 0;
        config.type2.n_downloads = n_downloads;
        config
    }

    fn run(config: &SimConfig) -> BotOutput {
        let mut catalog_rng = stream_rng(config.seed, Stream::Catalog);
        let plan = crate::simulator::catalog::generate_catalog(config, &mut catalog_rng);
        let mut device_forge = TokenForge::new();
        let mut ip_forge = TokenForge::new();
        let mut pool_rng = stream_rng(config.seed, Stream::DevicePool);
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
        let sampler = HourSampler::new(config.night_attenuation);
        let mut rng = stream_rng(config.seed, Stream::Bots);
        generate_bots(config, &plan, &pool, &sampler, &mut device_forge, &mut rng)
    }

    #[test]
    fn device_reset_means_distinct_devices() {
        let config = small_config(500);
        let out = run(&config);
        let downloads: Vec<&DraftEvent> = out.events.iter().filter(|e| e.kind == EventKind::Download).collect();
        assert_eq!(downloads.len(), 500);
        let devices: HashSet<&String> = downloads
            .iter()
            .map(|e| match &e.device {
                DeviceRef::Token(t) => t,
                _ => panic!("bot without token device"),
            })
            .collect();
        assert_eq!(devices.len(), 500);
        assert!(out.events.iter().all(|e| !e.vendor_verified && e.source == Source::Client));
    }

    #[test]
    fn certain_preludes_are_emitted_per_download() {
        let mut config = small_config(10);
        config.type2.p_search_before = 1.0;
        config.type2.p_view_before = 1.0;
        let out = run(&config);
        let searches = out.events.iter().filter(|e| e.kind == EventKind::Search).count();
        let views = out.events.iter().filter(|e| e.kind == EventKind::View).count();
        assert_eq!((searches, views), (10, 10));
        // prelude shares the download's one-off device
        let mut by_device: std::collections::HashMap<String, Vec<EventKind>> = Default::default();
        for e in &out.events {
            if let DeviceRef::Token(t) = &e.device {
                by_device.entry(t.clone()).or_default().push(e.kind);
            }
        }
        for kinds in by_device.values() {
            assert_eq!(kinds.len(), 3);
        }
    }

    #[test]
    fn steady_traffic_is_hourly_uniform() {
        let mut config = small_config(100_000);
        config.type2.p_search_before = 0.0;
        config.type2.p_view_before = 0.0;
        let out = run(&config);
        let mut bins = [0u64; 24];
        for e in &out.events {
            bins[((e.ts.rem_euclid(86_400)) / 3_600) as usize] += 1;
        }
        let n = 100_000f64;
        let p = 1.0 / 24.0;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for (h, count) in bins.iter().enumerate() {
            let diff = (*count as f64 - n * p).abs();
            assert!(diff <= 3.0 * sigma, "hour {h}: {count} vs {} +- {}", n * p, 3.0 * sigma);
        }
    }

    #[test]
    fn downloads_only_hit_released_targets() {
        let config = small_config(2_000);
        let mut catalog_rng = stream_rng(config.seed, Stream::Catalog);
        let plan = crate::simulator::catalog::generate_catalog(&config, &mut catalog_rng);
        let targets: HashSet<u32> = plan.target_indices.iter().copied().collect();
        let out = run(&config);
        for e in &out.events {
            assert!(targets.contains(&e.app));
            assert!(plan.entries[e.app as usize].release_ts <= e.ts);
        }
    }

    #[test]
    fn stable_device_when_reset_disabled() {
        let mut config = small_config(50);
        config.type2.reset_device_per_download = false;
        let out = run(&config);
        let devices: HashSet<&String> = out
            .events
            .iter()
            .map(|e| match &e.device {
                DeviceRef::Token(t) => t,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(devices.len(), 1);
    }
}
