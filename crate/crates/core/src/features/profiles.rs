//! Per-device, per-app, and per-IP behavior profiles aggregated from the log.

use std::collections::{HashMap, HashSet};

use crate::log_model::{EventKind, EventRecord, Source};

/// Hour bucket stats live on UTC hour boundaries.
const SECS_PER_HOUR: i64 = 3_600;

#[derive(Debug, Clone, Default, PartialEq)]
struct HourCounts {
    /// downloads per UTC hour bucket
    downloads: HashMap<i64, u32>,
    /// hour buckets with at least one event of any kind
    active: HashSet<i64>,
}

impl HourCounts {
    fn add(&mut self, ts: i64, is_download: bool) {
        let hour = ts.div_euclid(SECS_PER_HOUR);
        self.active.insert(hour);
        if is_download {
            *self.downloads.entry(hour).or_insert(0) += 1;
        }
    }

    fn merge(&mut self, other: HourCounts) {
        for (hour, n) in other.downloads {
            *self.downloads.entry(hour).or_insert(0) += n;
        }
        self.active.extend(other.active);
    }

    fn max_per_hour(&self) -> u32 {
        self.downloads.values().copied().max().unwrap_or(0)
    }

    /// Average downloads per active hour; integer sums divided once, so the
    /// result is identical however the log was partitioned.
    fn avg_per_hour(&self, total_downloads: u64) -> f64 {
        if self.active.is_empty() {
            0.0
        } else {
            total_downloads as f64 / self.active.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DeviceAcc {
    first_seen_ts: i64,
    downloads: u64,
    searches: u64,
    views: u64,
    hours: HourCounts,
    apps: HashSet<String>,
    ips: HashSet<String>,
}

impl Default for DeviceAcc {
    fn default() -> Self {
        DeviceAcc {
            first_seen_ts: i64::MAX,
            downloads: 0,
            searches: 0,
            views: 0,
            hours: HourCounts::default(),
            apps: HashSet::new(),
            ips: HashSet::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct AppAcc {
    downloads: u64,
    client_downloads: u64,
    installs: u64,
    views: u64,
    searches: u64,
    hours: HourCounts,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct IpAcc {
    downloads: u64,
    hours: HourCounts,
    devices: HashSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceProfile {
    pub first_seen_ts: i64,
    pub total_downloads: u64,
    pub avg_downloads_per_hour: f64,
    pub max_downloads_per_hour: u32,
    pub total_searches: u64,
    pub total_views: u64,
    pub distinct_apps: u64,
    pub distinct_ips: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppProfile {
    pub total_downloads: u64,
    pub avg_downloads_per_hour: f64,
    pub max_downloads_per_hour: u32,
    pub total_installs: u64,
    pub total_views: u64,
    pub total_searches: u64,
    pub client_download_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpProfile {
    pub total_downloads: u64,
    pub max_downloads_per_hour: u32,
    pub avg_downloads_per_device: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityProfiles {
    pub devices: HashMap<String, DeviceProfile>,
    pub apps: HashMap<String, AppProfile>,
    pub ips: HashMap<String, IpProfile>,
    pub window: (i64, i64),
}

impl EntityProfiles {
    pub fn device(&self, device_id: &str) -> Option<&DeviceProfile> {
        self.devices.get(device_id)
    }

    pub fn app(&self, app_id: &str) -> Option<&AppProfile> {
        self.apps.get(app_id)
    }

    pub fn ip(&self, ip_hash: &str) -> Option<&IpProfile> {
        self.ips.get(ip_hash)
    }
}

/// Streaming aggregator. Partition the log any way, `add` each record,
/// `merge` the parts, `finish`: the result is identical to one pass.
#[derive(Debug, Clone)]
pub struct ProfilesBuilder {
    window: (i64, i64),
    devices: HashMap<String, DeviceAcc>,
    apps: HashMap<String, AppAcc>,
    ips: HashMap<String, IpAcc>,
}

impl ProfilesBuilder {
    pub fn new(window: (i64, i64)) -> Self {
        ProfilesBuilder {
            window,
            devices: HashMap::new(),
            apps: HashMap::new(),
            ips: HashMap::new(),
        }
    }

    pub fn add(&mut self, r: &EventRecord) {
        if r.ts < self.window.0 || r.ts >= self.window.1 {
            return;
        }
        let is_download = r.kind == EventKind::Download;

        if !r.device_id.is_empty() {
            let d = self.devices.entry(r.device_id.clone()).or_default();
            d.first_seen_ts = d.first_seen_ts.min(r.ts);
            d.hours.add(r.ts, is_download);
            match r.kind {
                EventKind::Download => d.downloads += 1,
                EventKind::Search => d.searches += 1,
                EventKind::View => d.views += 1,
                _ => {}
            }
            if !d.apps.contains(&r.app_id) {
                d.apps.insert(r.app_id.clone());
            }
            if !d.ips.contains(&r.ip_hash) {
                d.ips.insert(r.ip_hash.clone());
            }
        }

        let a = self.apps.entry(r.app_id.clone()).or_default();
        a.hours.add(r.ts, is_download);
        match r.kind {
            EventKind::Download => {
                a.downloads += 1;
                if r.source == Source::Client {
                    a.client_downloads += 1;
                }
            }
            EventKind::Install => a.installs += 1,
            EventKind::View => a.views += 1,
            EventKind::Search => a.searches += 1,
            EventKind::Update => {}
        }

        let ip = self.ips.entry(r.ip_hash.clone()).or_default();
        ip.hours.add(r.ts, is_download);
        if is_download {
            ip.downloads += 1;
        }
        if !r.device_id.is_empty() && !ip.devices.contains(&r.device_id) {
            ip.devices.insert(r.device_id.clone());
        }
    }

    pub fn merge(mut self, other: ProfilesBuilder) -> ProfilesBuilder {
        assert_eq!(self.window, other.window, "merging profiles from different windows");
        for (k, v) in other.devices {
            match self.devices.entry(k) {
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(v);
                }
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    let d = e.get_mut();
                    d.first_seen_ts = d.first_seen_ts.min(v.first_seen_ts);
                    d.downloads += v.downloads;
                    d.searches += v.searches;
                    d.views += v.views;
                    d.hours.merge(v.hours);
                    d.apps.extend(v.apps);
                    d.ips.extend(v.ips);
                }
            }
        }
        for (k, v) in other.apps {
            match self.apps.entry(k) {
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(v);
                }
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    let a = e.get_mut();
                    a.downloads += v.downloads;
                    a.client_downloads += v.client_downloads;
                    a.installs += v.installs;
                    a.views += v.views;
                    a.searches += v.searches;
                    a.hours.merge(v.hours);
                }
            }
        }
        for (k, v) in other.ips {
            match self.ips.entry(k) {
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(v);
                }
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    let ip = e.get_mut();
                    ip.downloads += v.downloads;
                    ip.hours.merge(v.hours);
                    ip.devices.extend(v.devices);
                }
            }
        }
        self
    }

    pub fn finish(self) -> EntityProfiles {
        let devices = self
            .devices
            .into_iter()
            .map(|(k, d)| {
                let profile = DeviceProfile {
                    first_seen_ts: d.first_seen_ts,
                    total_downloads: d.downloads,
                    avg_downloads_per_hour: d.hours.avg_per_hour(d.downloads),
                    max_downloads_per_hour: d.hours.max_per_hour(),
                    total_searches: d.searches,
                    total_views: d.views,
                    distinct_apps: d.apps.len() as u64,
                    distinct_ips: d.ips.len() as u64,
                };
                (k, profile)
            })
            .collect();
        let apps = self
            .apps
            .into_iter()
            .map(|(k, a)| {
                let fraction = if a.downloads == 0 {
                    0.0
                } else {
                    a.client_downloads as f64 / a.downloads as f64
                };
                let profile = AppProfile {
                    total_downloads: a.downloads,
                    avg_downloads_per_hour: a.hours.avg_per_hour(a.downloads),
                    max_downloads_per_hour: a.hours.max_per_hour(),
                    total_installs: a.installs,
                    total_views: a.views,
                    total_searches: a.searches,
                    client_download_fraction: fraction,
                };
                (k, profile)
            })
            .collect();
        let ips = self
            .ips
            .into_iter()
            .map(|(k, ip)| {
                // farm records can carry no device id; an IP with only those
                // still averages over one nominal device
                let devices = ip.devices.len().max(1) as f64;
                let profile = IpProfile {
                    total_downloads: ip.downloads,
                    max_downloads_per_hour: ip.hours.max_per_hour(),
                    avg_downloads_per_device: ip.downloads as f64 / devices,
                };
                (k, profile)
            })
            .collect();
        EntityProfiles { devices, apps, ips, window: self.window }
    }
}

/// Window covering every record in the log, end exclusive.
pub fn full_span(log: &[EventRecord]) -> (i64, i64) {
    match (log.iter().map(|r| r.ts).min(), log.iter().map(|r| r.ts).max()) {
        (Some(lo), Some(hi)) => (lo, hi + 1),
        _ => (0, 0),
    }
}

pub fn build_profiles(log: &[EventRecord], window: (i64, i64)) -> EntityProfiles {
    let mut builder = ProfilesBuilder::new(window);
    for r in log {
        builder.add(r);
    }
    builder.finish()
}
