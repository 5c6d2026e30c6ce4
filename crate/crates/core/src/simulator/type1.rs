//! Scripted farm bursts: bulk injections against one app inside a short
//! window, visible through their source channel and device-id hygiene.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{DeviceIdMode, FarmProfile, SourceMode};
use crate::log_model::{EventKind, FraudType, Source};
use crate::simulator::pool::{patterned_token, TokenForge};
use crate::simulator::{DeviceRef, DraftEvent, IpRef};

pub(crate) fn generate_farm(
    farm: &FarmProfile,
    app: u32,
    window: (i64, i64),
    device_forge: &mut TokenForge,
    ip_forge: &mut TokenForge,
    rng: &mut ChaCha8Rng,
) -> Vec<DraftEvent> {
    let (start, end) = window;
    let duration = ((farm.duration_hours * 3600.0).round() as i64).max(1);
    let latest_start = (end - start - duration).max(0);
    let burst_start = start + rng.gen_range(0..=latest_start);

    let (kind, source) = match farm.source_mode {
        SourceMode::Portal => (EventKind::Download, Source::Portal),
        SourceMode::Null => (EventKind::Download, Source::Null),
        SourceMode::Update => (EventKind::Update, Source::Update),
    };

    // Addresses are pairwise distinct inside the burst and disjoint from the
    // organic pool; the forge guarantees both.
    let mut burst_ips = HashSet::new();
    let mut out = Vec::with_capacity(farm.n_downloads as usize);
    for _ in 0..farm.n_downloads {
        let ts = burst_start + rng.gen_range(0..duration);
        let device = match farm.device_id_mode {
            DeviceIdMode::None => DeviceRef::None,
            DeviceIdMode::Normal => DeviceRef::Token(device_forge.fresh(rng)),
            DeviceIdMode::Abnormal => DeviceRef::Token(patterned_token(rng)),
        };
        let ip = loop {
            let token = ip_forge.fresh(rng);
            if burst_ips.insert(token.clone()) {
                break token;
            }
        };
        out.push(DraftEvent {
            ts,
            kind,
            device,
            vendor_verified: false,
            app,
            ip: IpRef::Token(ip),
            source,
            fraud_type: FraudType::Farm,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn run(farm: &FarmProfile) -> Vec<DraftEvent> {
        let mut device_forge = TokenForge::new();
        let mut ip_forge = TokenForge::new();
        let mut rng = stream_rng(5, Stream::Farm(0));
        generate_farm(farm, 7, (0, 42 * 86_400), &mut device_forge, &mut ip_forge, &mut rng)
    }

    #[test]
    fn bulk_portal_burst() {
        let farm = FarmProfile {
            n_downloads: 20_000,
            source_mode: SourceMode::Portal,
            device_id_mode: DeviceIdMode::Abnormal,
            duration_hours: 1.0,
            distinct_ips: true,
        };
        let events = run(&farm);
        assert_eq!(events.len(), 20_000);
        let min = events.iter().map(|e| e.ts).min().unwrap();
        let max = events.iter().map(|e| e.ts).max().unwrap();
        assert!(max - min < 3_600);
        let ips: HashSet<&String> = events
            .iter()
            .map(|e| match &e.ip {
                IpRef::Token(t) => t,
                IpRef::Pool(_) => panic!("farm used a pool ip"),
            })
            .collect();
        assert_eq!(ips.len(), 20_000);
        assert!(events.iter().all(|e| e.source == Source::Portal && e.kind == EventKind::Download));
    }

    #[test]
    fn no_device_id_mode() {
        let farm = FarmProfile {
            n_downloads: 100,
            source_mode: SourceMode::Portal,
            device_id_mode: DeviceIdMode::None,
            duration_hours: 12.0,
            distinct_ips: true,
        };
        let events = run(&farm);
        assert!(events.iter().all(|e| matches!(e.device, DeviceRef::None) && !e.vendor_verified));
    }

    #[test]
    fn update_channel_emits_update_kind() {
        let farm = FarmProfile {
            n_downloads: 50,
            source_mode: SourceMode::Update,
            device_id_mode: DeviceIdMode::Normal,
            duration_hours: 2.0,
            distinct_ips: true,
        };
        let events = run(&farm);
        assert!(events.iter().all(|e| e.kind == EventKind::Update && e.source == Source::Update));
    }

    #[test]
    fn zero_volume_is_empty() {
        let farm = FarmProfile { n_downloads: 0, ..FarmProfile::default() };
        assert!(run(&farm).is_empty());
    }
}
