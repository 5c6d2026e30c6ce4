//! Simulation config: TOML file format, defaults, validation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log_model::{Category, ALL_CATEGORIES};

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, msg: msg.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    /// Length of the simulated window in whole days.
    pub horizon_days: u32,
    /// Epoch seconds of the window start (UTC midnight keeps day math clean).
    pub start_ts: i64,
    pub n_apps: u32,
    pub n_devices: u32,
    pub legit_downloads: u64,
    /// Hourly demand weight inside the night trough, relative to the peaks.
    pub night_attenuation: f64,
    pub legit: LegitProfile,
    pub catalog: CatalogParams,
    pub type1: FarmBlock,
    pub type2: BotBlock,
    pub type3: CrowdBlock,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 42,
            horizon_days: 42,
            start_ts: 1_609_459_200, // 2021-01-01T00:00:00Z
            n_apps: 200,
            n_devices: 165_000,
            legit_downloads: 87_000,
            night_attenuation: 0.2,
            legit: LegitProfile::default(),
            catalog: CatalogParams::default(),
            type1: FarmBlock::default(),
            type2: BotBlock::default(),
            type3: CrowdBlock::default(),
        }
    }
}

/// Behavior of organic users and their devices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LegitProfile {
    pub p_search_before: f64,
    pub p_view_before: f64,
    pub p_install_after: f64,
    /// Share of the pool that is heavily active (the rest are casual).
    pub active_device_fraction: f64,
    /// Download weight of an active device relative to a casual one.
    pub active_device_weight: f64,
    /// Share of devices with no in-window update history before their first
    /// foreground event (recently activated phones).
    pub new_device_fraction: f64,
    /// Mean background auto-update events per established device per day.
    pub updates_per_device_day: f64,
    /// NAT sharing: how many devices map onto one ip_hash.
    pub devices_per_ip: u32,
    /// Zipf exponent for app download popularity.
    pub popularity_skew: f64,
}

impl Default for LegitProfile {
    fn default() -> Self {
        LegitProfile {
            p_search_before: 0.5,
            p_view_before: 0.7,
            p_install_after: 0.8,
            active_device_fraction: 0.09,
            active_device_weight: 7.5,
            new_device_fraction: 0.10,
            updates_per_device_day: 0.2,
            devices_per_ip: 3,
            popularity_skew: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogParams {
    /// Probability mass per category for ordinary apps; must sum to 1.
    pub category_mix: BTreeMap<String, f64>,
    /// Mass assigned to {finance, game} among fraud-target apps.
    pub suspicious_category_boost: f64,
    /// Apps the bot campaigns are paid to promote.
    pub n_fraud_target_apps: u32,
    pub normal_rating_mean: f64,
    pub normal_rating_sd: f64,
    pub target_rating_mean: f64,
    pub target_rating_sd: f64,
    /// Share of ordinary apps released around the window start.
    pub new_normal_app_fraction: f64,
    /// Target releases are staggered over [start - lead, start + spread - lead].
    pub target_release_lead_days: u32,
    pub target_release_spread_days: u32,
}

impl Default for CatalogParams {
    fn default() -> Self {
        let mix = [
            ("finance", 0.07),
            ("game", 0.08),
            ("tools", 0.20),
            ("social", 0.15),
            ("shopping", 0.12),
            ("education", 0.10),
            ("life", 0.13),
            ("other", 0.15),
        ];
        CatalogParams {
            category_mix: mix.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            suspicious_category_boost: 0.65,
            n_fraud_target_apps: 15,
            normal_rating_mean: 3.2,
            normal_rating_sd: 0.8,
            target_rating_mean: 4.5,
            target_rating_sd: 0.4,
            new_normal_app_fraction: 0.03,
            target_release_lead_days: 2,
            target_release_spread_days: 22,
        }
    }
}

impl CatalogParams {
    /// Mix as a dense vector in category-code order.
    pub fn mix_vector(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (i, c) in ALL_CATEGORIES.iter().enumerate() {
            out[i] = self.category_mix.get(c.as_str()).copied().unwrap_or(0.0);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FarmBlock {
    pub enabled: bool,
    pub farms: Vec<FarmProfile>,
}

impl Default for FarmBlock {
    fn default() -> Self {
        FarmBlock { enabled: true, farms: vec![FarmProfile::default()] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Portal,
    Update,
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceIdMode {
    /// Requests carry no device id at all.
    None,
    /// Plausible one-off tokens.
    Normal,
    /// Short repeating patterns, the tell of a sloppy script.
    Abnormal,
}

/// One scripted injection burst.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FarmProfile {
    pub n_downloads: u64,
    pub source_mode: SourceMode,
    pub device_id_mode: DeviceIdMode,
    /// Burst length; timestamps are uniform inside it.
    pub duration_hours: f64,
    /// Farms never reuse an address inside one burst. Kept as a knob for
    /// config readability; `false` is rejected.
    pub distinct_ips: bool,
}

impl Default for FarmProfile {
    fn default() -> Self {
        FarmProfile {
            n_downloads: 3_000,
            source_mode: SourceMode::Portal,
            device_id_mode: DeviceIdMode::Abnormal,
            duration_hours: 24.0,
            distinct_ips: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BotBlock {
    pub enabled: bool,
    pub n_downloads: u64,
    /// Bots discard the device identity after every download.
    pub reset_device_per_download: bool,
    pub p_search_before: f64,
    pub p_view_before: f64,
    /// Probability a download goes to a target currently younger than the
    /// new-app threshold.
    pub target_new_apps_fraction: f64,
    /// Uniform timestamps around the clock instead of the diurnal curve.
    pub steady_traffic: bool,
    /// Give target apps the boosted rating distribution in the catalog.
    pub co_rating_boost: bool,
}

impl Default for BotBlock {
    fn default() -> Self {
        BotBlock {
            enabled: true,
            n_downloads: 6_000,
            reset_device_per_download: true,
            p_search_before: 0.8,
            p_view_before: 0.9,
            target_new_apps_fraction: 0.7,
            steady_traffic: true,
            co_rating_boost: true,
        }
    }
}

pub const TASK_KINDS: [&str; 5] = ["registration", "daily_signin", "repost", "add_account", "play_game"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrowdBlock {
    pub enabled: bool,
    pub n_workers: u64,
    pub tasks_per_worker: u32,
    /// In-app task mix; placeholder uniform prior by default. Tasks never
    /// reach the market log, they only show up in the run report.
    pub task_mix: BTreeMap<String, f64>,
}

impl Default for CrowdBlock {
    fn default() -> Self {
        CrowdBlock {
            enabled: true,
            n_workers: 2_000,
            tasks_per_worker: 3,
            task_mix: TASK_KINDS.iter().map(|k| (k.to_string(), 0.2)).collect(),
        }
    }
}

fn check_prob(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        return Err(invalid(field, format!("{v} is not a probability in [0, 1]")));
    }
    Ok(())
}

fn check_mass(field: &'static str, map: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<(), ConfigError> {
    for (k, v) in map {
        if !allowed.contains(&k.as_str()) {
            return Err(invalid(field, format!("unknown key `{k}`")));
        }
        if *v < 0.0 || !v.is_finite() {
            return Err(invalid(field, format!("`{k}` has negative or non-finite mass {v}")));
        }
    }
    let sum: f64 = map.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(invalid(field, format!("masses sum to {sum}, expected 1")));
    }
    Ok(())
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<SimConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: SimConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon_days == 0 {
            return Err(invalid("horizon_days", "must be at least 1"));
        }
        if self.start_ts < 0 {
            return Err(invalid("start_ts", "must be non-negative"));
        }
        if self.n_apps == 0 {
            return Err(invalid("n_apps", "must be at least 1"));
        }
        if self.n_devices == 0 {
            return Err(invalid("n_devices", "must be at least 1"));
        }
        check_prob("night_attenuation", self.night_attenuation)?;

        let l = &self.legit;
        check_prob("legit.p_search_before", l.p_search_before)?;
        check_prob("legit.p_view_before", l.p_view_before)?;
        check_prob("legit.p_install_after", l.p_install_after)?;
        check_prob("legit.active_device_fraction", l.active_device_fraction)?;
        check_prob("legit.new_device_fraction", l.new_device_fraction)?;
        if l.active_device_weight < 1.0 || !l.active_device_weight.is_finite() {
            return Err(invalid("legit.active_device_weight", "must be >= 1"));
        }
        if l.updates_per_device_day < 0.0 || !l.updates_per_device_day.is_finite() {
            return Err(invalid("legit.updates_per_device_day", "must be >= 0"));
        }
        if l.devices_per_ip == 0 {
            return Err(invalid("legit.devices_per_ip", "must be at least 1"));
        }
        if !(0.0..=3.0).contains(&l.popularity_skew) {
            return Err(invalid("legit.popularity_skew", "must be in [0, 3]"));
        }

        let c = &self.catalog;
        let cat_names: Vec<&str> = ALL_CATEGORIES.iter().map(|c| c.as_str()).collect();
        check_mass("catalog.category_mix", &c.category_mix, &cat_names)?;
        check_prob("catalog.suspicious_category_boost", c.suspicious_category_boost)?;
        check_prob("catalog.new_normal_app_fraction", c.new_normal_app_fraction)?;
        for (field, mean) in [
            ("catalog.normal_rating_mean", c.normal_rating_mean),
            ("catalog.target_rating_mean", c.target_rating_mean),
        ] {
            if !(1.0..=5.0).contains(&mean) {
                return Err(invalid(field, format!("{mean} outside [1.0, 5.0]")));
            }
        }
        for (field, sd) in [
            ("catalog.normal_rating_sd", c.normal_rating_sd),
            ("catalog.target_rating_sd", c.target_rating_sd),
        ] {
            if sd <= 0.0 || !sd.is_finite() {
                return Err(invalid(field, "must be positive"));
            }
        }
        if c.target_release_spread_days == 0 {
            return Err(invalid("catalog.target_release_spread_days", "must be at least 1"));
        }

        let farm_apps = if self.type1.enabled { self.type1.farms.len() as u32 } else { 0 };
        let reserved = c.n_fraud_target_apps + farm_apps;
        if reserved >= self.n_apps {
            return Err(invalid(
                "n_apps",
                format!("{} apps cannot host {reserved} fraud-dedicated apps plus ordinary traffic", self.n_apps),
            ));
        }

        if self.type1.enabled {
            for (i, farm) in self.type1.farms.iter().enumerate() {
                if farm.duration_hours <= 0.0 || !farm.duration_hours.is_finite() {
                    return Err(invalid("type1.farms.duration_hours", format!("farm {i}: must be positive")));
                }
                if farm.duration_hours > f64::from(self.horizon_days) * 24.0 {
                    return Err(invalid(
                        "type1.farms.duration_hours",
                        format!("farm {i}: burst longer than the horizon"),
                    ));
                }
                if !farm.distinct_ips {
                    return Err(invalid("type1.farms.distinct_ips", format!("farm {i}: farms always use distinct ips")));
                }
            }
        }

        check_prob("type2.p_search_before", self.type2.p_search_before)?;
        check_prob("type2.p_view_before", self.type2.p_view_before)?;
        check_prob("type2.target_new_apps_fraction", self.type2.target_new_apps_fraction)?;
        if self.type2.enabled && self.type2.n_downloads > 0 && c.n_fraud_target_apps == 0 {
            return Err(invalid("catalog.n_fraud_target_apps", "bot traffic enabled but no target apps"));
        }

        if self.type3.enabled {
            check_mass("type3.task_mix", &self.type3.task_mix, &TASK_KINDS)?;
            // Workers hold distinct real devices drawn from the pool.
            if self.type3.n_workers > u64::from(self.n_devices) {
                return Err(invalid(
                    "type3.n_workers",
                    format!("{} workers need distinct devices but the pool has {}", self.type3.n_workers, self.n_devices),
                ));
            }
        }
        Ok(())
    }

    pub fn window_end_ts(&self) -> i64 {
        self.start_ts + i64::from(self.horizon_days) * 86_400
    }

    /// Categories with boosted mass for fraud-target apps: the boost goes to
    /// {finance, game} split evenly, the remainder follows the ordinary mix.
    pub fn target_mix_vector(&self) -> [f64; 8] {
        let base = self.catalog.mix_vector();
        let boost = self.catalog.suspicious_category_boost;
        let fin = Category::Finance.code() as usize;
        let game = Category::Game.code() as usize;
        let rest_mass: f64 = base
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fin && *i != game)
            .map(|(_, v)| v)
            .sum();
        let mut out = [0.0; 8];
        for (i, v) in base.iter().enumerate() {
            if i == fin || i == game {
                out[i] = boost / 2.0;
            } else if rest_mass > 0.0 {
                out[i] = v * (1.0 - boost) / rest_mass;
            }
        }
        out
    }
}
