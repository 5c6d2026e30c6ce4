//! Per-stage run manifest (deterministic) and timing file (volatile).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::CliError;

/// Everything a stage records about itself except how long it took; two runs
/// with the same inputs write identical manifests.
#[derive(Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: &'static str,
    pub format_versions: BTreeMap<&'static str, u32>,
    /// FNV-1a over the canonical serialization of the stage's parameters.
    pub config_hash: String,
    pub seeds: BTreeMap<&'static str, u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str, params: &impl Serialize) -> Result<RunManifest, CliError> {
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            format_versions: BTreeMap::from([
                ("log", fraudlab_core::log_model::LOG_FORMAT_VERSION),
                ("model", fraudlab_core::trees::MODEL_FORMAT_VERSION),
                ("feature_registry", fraudlab_core::features::REGISTRY_VERSION),
            ]),
            config_hash: config_hash(params)?,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        write_json(&out_dir.join("manifest.json"), self)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn config_hash(params: &impl Serialize) -> Result<String, CliError> {
    let text = serde_json::to_string(params)
        .map_err(|e| CliError::Internal { message: format!("serialize params: {e}") })?;
    Ok(format!("{:016x}", fnv1a64(text.as_bytes())))
}

#[derive(Default, Serialize)]
pub struct Timings {
    pub stages: BTreeMap<&'static str, f64>,
    pub total_secs: f64,
}

/// Wall-clock laps per stage; the result lands in `timings.json` only, so
/// every other artifact stays byte-identical across runs.
pub struct StageClock {
    t0: Instant,
    last: Instant,
    timings: Timings,
}

impl StageClock {
    pub fn start() -> StageClock {
        let now = Instant::now();
        StageClock { t0: now, last: now, timings: Timings::default() }
    }

    pub fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.timings.stages.insert(stage, now.duration_since(self.last).as_secs_f64());
        self.last = now;
    }

    pub fn write(mut self, out_dir: &Path) -> Result<(), CliError> {
        self.timings.total_secs = self.t0.elapsed().as_secs_f64();
        write_json(&out_dir.join("timings.json"), &self.timings)
    }
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Internal { message: format!("create {}: {e}", path.display()) })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal { message: format!("serialize {}: {e}", path.display()) })?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Internal { message: format!("write {}: {e}", path.display()) })
}
