//! Source and device giveaway rules for type-1 farm traffic.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::log_model::{EventKind, EventRecord, Source};

/// Distinct devices updating one app within one UTC hour before the burst
/// rule trips. Sits far above any legit update rate yet far below a farm's.
pub const DEFAULT_UPDATE_BURST_PER_HOUR: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    PortalSource,
    NullSource,
    EmptyDevice,
    UpdateBurst,
}

impl FilterReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterReason::PortalSource => "portal_source",
            FilterReason::NullSource => "null_source",
            FilterReason::EmptyDevice => "empty_device",
            FilterReason::UpdateBurst => "update_burst",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterHit {
    pub event_id: u64,
    pub reason: FilterReason,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FilterParams {
    pub update_burst_per_hour: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams { update_burst_per_hour: DEFAULT_UPDATE_BURST_PER_HOUR }
    }
}

/// Flags records whose shape gives a farm script away. Downloads are matched
/// by source and missing device id; updates by per-app hourly device bursts.
/// One reason per hit, source rules before the device rule. Hits keep log
/// order.
pub fn type1_rule_filter(log: &[EventRecord], params: &FilterParams) -> Vec<FilterHit> {
    let mut burst_devices: HashMap<(&str, i64), HashSet<&str>> = HashMap::new();
    for r in log {
        if r.kind == EventKind::Update {
            burst_devices
                .entry((r.app_id.as_str(), r.ts.div_euclid(3600)))
                .or_default()
                .insert(r.device_id.as_str());
        }
    }

    let mut hits = Vec::new();
    for r in log {
        let reason = match r.kind {
            EventKind::Download => match r.source {
                Source::Portal => Some(FilterReason::PortalSource),
                Source::Null => Some(FilterReason::NullSource),
                _ if r.device_id.is_empty() => Some(FilterReason::EmptyDevice),
                _ => None,
            },
            EventKind::Update => {
                let key = (r.app_id.as_str(), r.ts.div_euclid(3600));
                (burst_devices[&key].len() > params.update_burst_per_hour)
                    .then_some(FilterReason::UpdateBurst)
            }
            _ => None,
        };
        if let Some(reason) = reason {
            hits.push(FilterHit { event_id: r.event_id, reason });
        }
    }
    hits
}

pub const FILTER_HEADER: &str = "event_id,reason";

pub fn write_filter_csv<W: std::io::Write>(w: &mut W, hits: &[FilterHit]) -> std::io::Result<()> {
    writeln!(w, "{FILTER_HEADER}")?;
    for h in hits {
        writeln!(w, "{},{}", h.event_id, h.reason.as_str())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(event_id: u64, ts: i64, kind: EventKind, device: &str, source: Source) -> EventRecord {
        EventRecord {
            event_id,
            ts,
            kind,
            device_id: device.to_string(),
            vendor_verified: true,
            app_id: "app-0".to_string(),
            ip_hash: "00112233aabbccdd".to_string(),
            source,
        }
    }

    #[test]
    fn portal_and_null_downloads_are_flagged_by_source() {
        let log = vec![
            record(0, 100, EventKind::Download, "aaaaaaaaaaaaaaaa", Source::Portal),
            record(1, 200, EventKind::Download, "bbbbbbbbbbbbbbbb", Source::Null),
            record(2, 300, EventKind::Download, "cccccccccccccccc", Source::Client),
        ];
        let hits = type1_rule_filter(&log, &FilterParams::default());
        assert_eq!(
            hits,
            vec![
                FilterHit { event_id: 0, reason: FilterReason::PortalSource },
                FilterHit { event_id: 1, reason: FilterReason::NullSource },
            ]
        );
    }

    #[test]
    fn source_rules_outrank_the_empty_device_rule() {
        let log = vec![
            record(0, 100, EventKind::Download, "", Source::Portal),
            record(1, 200, EventKind::Download, "", Source::Null),
            record(2, 300, EventKind::Download, "", Source::Client),
        ];
        let reasons: Vec<FilterReason> =
            type1_rule_filter(&log, &FilterParams::default()).into_iter().map(|h| h.reason).collect();
        assert_eq!(
            reasons,
            vec![FilterReason::PortalSource, FilterReason::NullSource, FilterReason::EmptyDevice]
        );
    }

    #[test]
    fn update_burst_needs_distinct_devices_in_one_hour() {
        let mut log = Vec::new();
        // 150 distinct devices hit app-0 in hour 0: burst
        for i in 0..150u64 {
            log.push(record(i, i as i64, EventKind::Update, &format!("{i:016x}"), Source::Update));
        }
        // one device repeating 150 times in hour 1: quiet
        for i in 0..150u64 {
            log.push(record(
                1000 + i,
                3600 + i as i64,
                EventKind::Update,
                "deaddeaddeaddead",
                Source::Update,
            ));
        }
        // 60 devices per hour straddling an hour boundary: quiet
        for i in 0..120u64 {
            log.push(record(
                2000 + i,
                7200 + if i < 60 { 0 } else { 3600 } + i as i64,
                EventKind::Update,
                &format!("{:016x}", 0xaaaa_0000 + i),
                Source::Update,
            ));
        }
        let hits = type1_rule_filter(&log, &FilterParams::default());
        assert_eq!(hits.len(), 150);
        assert!(hits.iter().all(|h| h.event_id < 150 && h.reason == FilterReason::UpdateBurst));
    }

    #[test]
    fn legit_shaped_traffic_is_untouched() {
        let log = vec![
            record(0, 100, EventKind::Search, "aaaaaaaaaaaaaaaa", Source::Client),
            record(1, 150, EventKind::View, "aaaaaaaaaaaaaaaa", Source::Client),
            record(2, 200, EventKind::Download, "aaaaaaaaaaaaaaaa", Source::Client),
            record(3, 250, EventKind::Install, "aaaaaaaaaaaaaaaa", Source::Client),
            record(4, 300, EventKind::Update, "aaaaaaaaaaaaaaaa", Source::Update),
        ];
        assert!(type1_rule_filter(&log, &FilterParams::default()).is_empty());
    }

    #[test]
    fn simulated_farm_traffic_filters_cleanly() {
        use crate::config::{DeviceIdMode, FarmProfile, SimConfig, SourceMode};
        use crate::log_model::FraudType;

        let mut config = SimConfig::default();
        config.n_devices = 30_000;
        config.legit_downloads = 10_000;
        config.horizon_days = 14;
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
        let out = crate::simulator::simulate(&config).unwrap();

        let hits = type1_rule_filter(&out.records, &FilterParams::default());
        let flagged: std::collections::HashSet<u64> = hits.iter().map(|h| h.event_id).collect();
        let farm: std::collections::HashSet<u64> = out
            .truth
            .iter()
            .filter(|t| t.fraud_type == FraudType::Farm)
            .map(|t| t.event_id)
            .collect();

        let false_pos = flagged.difference(&farm).count();
        assert_eq!(false_pos, 0, "legit events flagged");
        let caught = flagged.intersection(&farm).count();
        assert!(
            caught as f64 / farm.len() as f64 >= 0.99,
            "recall {} of {}",
            caught,
            farm.len()
        );
    }

    #[test]
    fn hits_keep_log_order_and_write_as_csv() {
        let log = vec![
            record(7, 100, EventKind::Download, "", Source::Client),
            record(9, 200, EventKind::Download, "x123456789abcdef", Source::Portal),
        ];
        let hits = type1_rule_filter(&log, &FilterParams::default());
        assert_eq!(hits[0].event_id, 7);
        assert_eq!(hits[1].event_id, 9);

        let mut buf = Vec::new();
        write_filter_csv(&mut buf, &hits).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "event_id,reason\n7,empty_device\n9,portal_source\n"
        );
    }
}
