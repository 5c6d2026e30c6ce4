//! Device/IP pool for organic traffic, plus unique token minting.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Mints 16-hex tokens, guaranteed unique across the simulation.
pub struct TokenForge {
    used: HashSet<u64>,
}

impl TokenForge {
    pub fn new() -> Self {
        TokenForge { used: HashSet::new() }
    }

    pub fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let raw: u64 = rng.gen();
            if self.used.insert(raw) {
                return format!("{raw:016x}");
            }
        }
    }
}

impl Default for TokenForge {
    fn default() -> Self {
        Self::new()
    }
}

/// A short hex stem repeated to 16 chars; the signature of a sloppy script.
/// Collisions between bursts of such tokens are allowed and realistic.
pub fn patterned_token(rng: &mut ChaCha8Rng) -> String {
    let stem: u16 = rng.gen();
    format!("{stem:04x}").repeat(4)
}

pub struct DevicePool {
    pub device_tokens: Vec<String>,
    pub ip_tokens: Vec<String>,
    /// device index -> index into ip_tokens (NAT grouping).
    pub device_ip: Vec<u32>,
    /// Established devices have background auto-update history.
    pub has_background: Vec<bool>,
    n_active: usize,
    active_weight: f64,
    total_mass: f64,
}

impl DevicePool {
    pub fn generate(
        n_devices: u32,
        devices_per_ip: u32,
        active_fraction: f64,
        active_weight: f64,
        new_device_fraction: f64,
        device_forge: &mut TokenForge,
        ip_forge: &mut TokenForge,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let n = n_devices as usize;
        let device_tokens: Vec<String> = (0..n).map(|_| device_forge.fresh(rng)).collect();
        let n_ips = n.div_ceil(devices_per_ip as usize);
        let ip_tokens: Vec<String> = (0..n_ips).map(|_| ip_forge.fresh(rng)).collect();
        let device_ip: Vec<u32> = (0..n).map(|i| (i / devices_per_ip as usize) as u32).collect();
        let has_background: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() >= new_device_fraction).collect();

        // Tokens are random, so a deterministic prefix as the active tier is
        // as good as sampling one.
        let n_active = ((n as f64) * active_fraction).round() as usize;
        let total_mass = (n - n_active) as f64 + n_active as f64 * active_weight;
        DevicePool { device_tokens, ip_tokens, device_ip, has_background, n_active, active_weight, total_mass }
    }

    pub fn len(&self) -> usize {
        self.device_tokens.len()
    }

    /// Tier-weighted draw used for every organic download. Active devices
    /// (the prefix) download `active_weight` times as often as casual ones.
    pub fn sample_download_device(&self, rng: &mut ChaCha8Rng) -> u32 {
        let n = self.len();
        let u: f64 = rng.gen::<f64>() * self.total_mass;
        if u < self.n_active as f64 * self.active_weight {
            (u / self.active_weight) as u32
        } else {
            let offset = ((u - self.n_active as f64 * self.active_weight) / 1.0) as usize;
            (self.n_active + offset).min(n - 1) as u32
        }
    }

    /// Distinct devices for crowd workers, drawn with the same tier weighting
    /// as organic downloads so workers stay indistinguishable.
    pub fn sample_distinct_weighted(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
        assert!(count <= self.len());
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let d = self.sample_download_device(rng);
            if chosen.insert(d) {
                out.push(d);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn pool() -> DevicePool {
        let mut device_forge = TokenForge::new();
        let mut ip_forge = TokenForge::new();
        let mut rng = stream_rng(11, Stream::DevicePool);
        DevicePool::generate(10_000, 3, 0.1, 5.0, 0.1, &mut device_forge, &mut ip_forge, &mut rng)
    }

    #[test]
    fn tokens_unique_and_hex() {
        let p = pool();
        let distinct: HashSet<&String> = p.device_tokens.iter().collect();
        assert_eq!(distinct.len(), p.len());
        assert!(p.device_tokens.iter().all(|t| t.len() == 16));
        assert_eq!(p.ip_tokens.len(), 10_000_usize.div_ceil(3));
    }

    #[test]
    fn active_tier_oversampled() {
        let p = pool();
        let mut rng = stream_rng(12, Stream::LegitTraffic);
        let mut active = 0u32;
        let n = 100_000;
        for _ in 0..n {
            if (p.sample_download_device(&mut rng) as usize) < 1_000 {
                active += 1;
            }
        }
        // active mass = 1000*5 / (9000 + 5000) ~ 0.357
        let share = f64::from(active) / f64::from(n);
        assert!((share - 0.357).abs() < 0.01, "{share}");
    }

    #[test]
    fn distinct_weighted_sample() {
        let p = pool();
        let mut rng = stream_rng(13, Stream::Crowd);
        let picked = p.sample_distinct_weighted(500, &mut rng);
        let set: HashSet<u32> = picked.iter().copied().collect();
        assert_eq!(set.len(), 500);
    }

    #[test]
    fn patterned_tokens_parse_as_hex() {
        let mut rng = stream_rng(14, Stream::Farm(0));
        for _ in 0..32 {
            let t = patterned_token(&mut rng);
            assert_eq!(t.len(), 16);
            assert_eq!(&t[0..4], &t[4..8]);
        }
    }
}
