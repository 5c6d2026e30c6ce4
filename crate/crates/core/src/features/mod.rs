//! Feature registry and extraction: a fixed, versioned vector of behavioral
//! statistics per download record, tagged by entity (device/app/ip) and
//! origin (new/previous) for ablation runs.

mod matrix;
mod profiles;

pub use matrix::{
    build_matrix, featurize, parse_matrix_csv, parse_matrix_file, select_features,
    write_matrix_csv, write_matrix_file, FeatureMatrix,
};
pub use profiles::{
    build_profiles, full_span, AppProfile, DeviceProfile, EntityProfiles, IpProfile,
    ProfilesBuilder,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::log_model::ALL_CATEGORIES;

/// Bump when the registry (names, order, tags, or semantics) changes.
pub const REGISTRY_VERSION: u32 = 1;

/// An entity is "new" when first seen less than this long before the record.
pub const NEW_THRESHOLD_SECS: i64 = 168 * 3_600;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("app {app_id:?} not present in the catalog")]
    UnknownApp { app_id: String },
    #[error("unknown feature set {name:?} (expected device, app, new, previous, or all)")]
    UnknownSetName { name: String },
    #[error("matrix lacks required column {name:?}")]
    MissingColumn { name: String },
    #[error("line {line}: expected header {expected:?}, found {found:?}")]
    Header { line: usize, expected: String, found: String },
    #[error("line {line}: {msg}")]
    Field { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    Device,
    App,
    Ip,
}

impl Entity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Entity::Device => "device",
            Entity::App => "app",
            Entity::Ip => "ip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    New,
    Previous,
}

impl Origin {
    pub fn as_str(&self) -> &'static str {
        match self {
            Origin::New => "new",
            Origin::Previous => "previous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDef {
    pub name: &'static str,
    pub entity: Entity,
    pub origin: Origin,
}

const fn f(name: &'static str, entity: Entity, origin: Origin) -> FeatureDef {
    FeatureDef { name, entity, origin }
}

/// The registry: order is the column order everywhere. None of these read the
/// vendor flag; labels come from it, features must not.
pub const FEATURES: [FeatureDef; 21] = [
    f("is_new_device", Entity::Device, Origin::New),
    f("device_total_downloads", Entity::Device, Origin::Previous),
    f("device_avg_downloads_per_hour", Entity::Device, Origin::Previous),
    f("device_max_downloads_per_hour", Entity::Device, Origin::Previous),
    f("device_total_searches", Entity::Device, Origin::New),
    f("device_total_views", Entity::Device, Origin::New),
    f("device_distinct_apps", Entity::Device, Origin::Previous),
    f("device_distinct_ips", Entity::Device, Origin::Previous),
    f("is_new_app", Entity::App, Origin::New),
    f("app_total_downloads", Entity::App, Origin::Previous),
    f("app_avg_downloads_per_hour", Entity::App, Origin::Previous),
    f("app_max_downloads_per_hour", Entity::App, Origin::Previous),
    f("app_total_installs", Entity::App, Origin::Previous),
    f("app_total_views", Entity::App, Origin::New),
    f("app_total_searches", Entity::App, Origin::New),
    f("app_client_download_fraction", Entity::App, Origin::New),
    f("app_category", Entity::App, Origin::Previous),
    f("app_rating", Entity::App, Origin::Previous),
    f("ip_total_downloads", Entity::Ip, Origin::Previous),
    f("ip_max_downloads_per_hour", Entity::Ip, Origin::Previous),
    f("ip_avg_downloads_per_device", Entity::Ip, Origin::Previous),
];

pub const N_FEATURES: usize = FEATURES.len();

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURES.iter().position(|d| d.name == name)
}

/// FNV-1a over `name:entity:origin` lines; pins the registry a model or
/// matrix was built against.
pub fn manifest_hash() -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for d in &FEATURES {
        for part in [d.name, ":", d.entity.as_str(), ":", d.origin.as_str(), "\n"] {
            for b in part.bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    hash
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ManifestFeature {
    pub index: usize,
    pub name: String,
    pub entity: Entity,
    pub origin: Origin,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FeatureManifest {
    pub registry_version: u32,
    pub manifest_hash: String,
    pub new_threshold_secs: i64,
    pub features: Vec<ManifestFeature>,
    /// category name -> ordinal code used in the app_category column
    pub category_codes: Vec<(String, u8)>,
}

pub fn manifest() -> FeatureManifest {
    FeatureManifest {
        registry_version: REGISTRY_VERSION,
        manifest_hash: format!("{:016x}", manifest_hash()),
        new_threshold_secs: NEW_THRESHOLD_SECS,
        features: FEATURES
            .iter()
            .enumerate()
            .map(|(index, d)| ManifestFeature {
                index,
                name: d.name.to_string(),
                entity: d.entity,
                origin: d.origin,
            })
            .collect(),
        category_codes: ALL_CATEGORIES.iter().map(|c| (c.as_str().to_string(), c.code())).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Device,
    App,
    New,
    Previous,
    All,
}

pub const ALL_FEATURE_SETS: [FeatureSet; 5] =
    [FeatureSet::Device, FeatureSet::App, FeatureSet::New, FeatureSet::Previous, FeatureSet::All];

impl FeatureSet {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSet::Device => "device",
            FeatureSet::App => "app",
            FeatureSet::New => "new",
            FeatureSet::Previous => "previous",
            FeatureSet::All => "all",
        }
    }

    pub fn parse(name: &str) -> Result<FeatureSet, FeatureError> {
        match name {
            "device" => Ok(FeatureSet::Device),
            "app" => Ok(FeatureSet::App),
            "new" => Ok(FeatureSet::New),
            "previous" => Ok(FeatureSet::Previous),
            "all" => Ok(FeatureSet::All),
            _ => Err(FeatureError::UnknownSetName { name: name.to_string() }),
        }
    }

    /// Column indices of the registry features in this set, in registry order.
    pub fn column_indices(&self) -> Vec<usize> {
        FEATURES
            .iter()
            .enumerate()
            .filter(|(_, d)| match self {
                FeatureSet::Device => d.entity == Entity::Device,
                FeatureSet::App => d.entity == Entity::App,
                FeatureSet::New => d.origin == Origin::New,
                FeatureSet::Previous => d.origin == Origin::Previous,
                FeatureSet::All => true,
            })
            .map(|(i, _)| i)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn registry_names_unique() {
        let names: BTreeSet<&str> = FEATURES.iter().map(|d| d.name).collect();
        assert_eq!(names.len(), N_FEATURES);
    }

    #[test]
    fn origin_tags_partition_registry() {
        let new = FeatureSet::New.column_indices();
        let previous = FeatureSet::Previous.column_indices();
        assert_eq!(new.len() + previous.len(), N_FEATURES);
        let union: BTreeSet<usize> = new.iter().chain(&previous).copied().collect();
        assert_eq!(union.len(), N_FEATURES);
        assert_eq!(new.len(), 7);
    }

    #[test]
    fn entity_tags_partition_registry() {
        let device = FeatureSet::Device.column_indices();
        let app = FeatureSet::App.column_indices();
        let ip: Vec<usize> = FEATURES
            .iter()
            .enumerate()
            .filter(|(_, d)| d.entity == Entity::Ip)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(device.len() + app.len() + ip.len(), N_FEATURES);
        assert_eq!(device.len(), 8);
        assert_eq!(app.len(), 10);
        assert_eq!(ip.len(), 3);
    }

    #[test]
    fn select_all_is_identity() {
        assert_eq!(FeatureSet::All.column_indices(), (0..N_FEATURES).collect::<Vec<_>>());
    }

    #[test]
    fn set_names_roundtrip_and_reject_unknown() {
        for set in ALL_FEATURE_SETS {
            assert_eq!(FeatureSet::parse(set.as_str()).unwrap(), set);
        }
        assert!(matches!(
            FeatureSet::parse("everything"),
            Err(FeatureError::UnknownSetName { .. })
        ));
    }

    #[test]
    fn manifest_hash_is_frozen() {
        // independently recomputed; a registry change must bump REGISTRY_VERSION
        assert_eq!(manifest_hash(), 0x6b98_44fd_8990_866d);
        assert_eq!(manifest().manifest_hash, "6b9844fd8990866d");
        assert_eq!(REGISTRY_VERSION, 1);
    }

    const GOLDEN_MANIFEST: &str = include_str!("golden_manifest.json");

    #[test]
    fn manifest_matches_golden_file() {
        let text = serde_json::to_string_pretty(&manifest()).unwrap();
        assert_eq!(text, GOLDEN_MANIFEST.trim_end());
    }

    // cargo test -p fraudlab-core regenerate_golden_manifest -- --ignored
    #[test]
    #[ignore]
    fn regenerate_golden_manifest() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/src/features/golden_manifest.json");
        std::fs::write(path, serde_json::to_string_pretty(&manifest()).unwrap()).unwrap();
    }

    #[test]
    fn manifest_lists_every_feature_with_index() {
        let m = manifest();
        assert_eq!(m.features.len(), N_FEATURES);
        for (i, mf) in m.features.iter().enumerate() {
            assert_eq!(mf.index, i);
            assert_eq!(mf.name, FEATURES[i].name);
        }
        assert_eq!(m.category_codes.len(), 8);
        assert_eq!(m.category_codes[0], ("finance".to_string(), 0));
    }
}
