//! Crowd workers: real users on real devices paid to download and run an
//! app. Their market-side records are generated by the same code path as
//! organic downloads; the paid part (in-app tasks) never hits the market log
//! and is only tallied for the run report.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::SimConfig;
use crate::log_model::FraudType;
use crate::simulator::catalog::CatalogPlan;
use crate::simulator::diurnal::HourSampler;
use crate::simulator::legit::{diurnal_ts, download_with_context};
use crate::simulator::pool::DevicePool;
use crate::simulator::DraftEvent;

pub(crate) struct CrowdOutput {
    pub events: Vec<DraftEvent>,
    pub task_counts: BTreeMap<String, u64>,
    pub worker_devices: Vec<u32>,
}

pub(crate) fn generate_crowd(
    config: &SimConfig,
    plan: &CatalogPlan,
    pool: &DevicePool,
    sampler: &HourSampler,
    rng: &mut ChaCha8Rng,
) -> CrowdOutput {
    let crowd = &config.type3;
    let worker_devices = pool.sample_distinct_weighted(crowd.n_workers as usize, rng);

    let task_names: Vec<&String> = crowd.task_mix.keys().collect();
    let mut task_cdf = Vec::with_capacity(task_names.len());
    let mut acc = 0.0;
    for name in &task_names {
        acc += crowd.task_mix[*name];
        task_cdf.push(acc);
    }

    let mut task_counts: BTreeMap<String, u64> =
        crowd.task_mix.keys().map(|k| (k.clone(), 0)).collect();
    let mut out = Vec::with_capacity(worker_devices.len() * 4);
    for &device in &worker_devices {
        let ts = diurnal_ts(config, sampler, rng);
        let app = plan.sample_released_app(rng, ts);
        // Every worker installs: running the app is what they are paid for.
        download_with_context(config, ts, device, app, pool, FraudType::Crowd, true, rng, &mut out);
        for _ in 0..crowd.tasks_per_worker {
            let u: f64 = rng.gen::<f64>() * acc;
            let slot = task_cdf.partition_point(|c| *c <= u).min(task_names.len() - 1);
            *task_counts.get_mut(task_names[slot]).unwrap() += 1;
        }
    }
    CrowdOutput { events: out, task_counts, worker_devices }
}
