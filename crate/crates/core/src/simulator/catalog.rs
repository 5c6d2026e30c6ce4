//! Catalog generation: categories by quota, ratings, staggered releases,
//! download-popularity weights, and designation of fraud-target apps.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::SimConfig;
use crate::log_model::{AppCatalogEntry, Category, ALL_CATEGORIES};

const DAY: i64 = 86_400;

pub struct CatalogPlan {
    pub entries: Vec<AppCatalogEntry>,
    /// Apps the bot campaigns promote.
    pub target_indices: Vec<u32>,
    /// One obscure ordinary app per farm burst.
    pub farm_indices: Vec<u32>,
    /// Relative weight of each app in organic download choice.
    pub popularity: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CatalogPlan {
    /// Weighted draw among apps already released at `ts`. Unreleased apps
    /// carry negligible mass, so rejection terminates quickly.
    pub fn sample_released_app(&self, rng: &mut ChaCha8Rng, ts: i64) -> u32 {
        loop {
            let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
            let idx = self.cumulative.partition_point(|c| *c <= u).min(self.entries.len() - 1);
            if self.entries[idx].release_ts <= ts {
                return idx as u32;
            }
        }
    }
}

/// Splits `total` into per-category counts by largest remainder, so the
/// configured masses are realized exactly instead of on average.
pub fn quota_counts(mix: &[f64; 8], total: usize) -> [usize; 8] {
    let mut counts = [0usize; 8];
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(8);
    let mut assigned = 0;
    for i in 0..8 {
        let exact = mix[i] * total as f64;
        counts[i] = exact.floor() as usize;
        assigned += counts[i];
        remainders.push((i, exact - exact.floor()));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (i, _) in remainders.iter().take(total - assigned) {
        counts[*i] += 1;
    }
    counts
}

fn category_labels(mix: &[f64; 8], total: usize, rng: &mut ChaCha8Rng) -> Vec<Category> {
    let counts = quota_counts(mix, total);
    let mut labels = Vec::with_capacity(total);
    for (i, n) in counts.iter().enumerate() {
        labels.extend(std::iter::repeat(ALL_CATEGORIES[i]).take(*n));
    }
    labels.shuffle(rng);
    labels
}

fn sample_rating(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    let raw = Normal::new(mean, sd).unwrap().sample(rng);
    // One-decimal quantization keeps the catalog file round-trip exact.
    (raw.clamp(1.0, 5.0) * 10.0).round() / 10.0
}

pub fn generate_catalog(config: &SimConfig, rng: &mut ChaCha8Rng) -> CatalogPlan {
    let n_apps = config.n_apps as usize;
    let n_targets = if config.type2.enabled { config.catalog.n_fraud_target_apps as usize } else { 0 };
    let n_farms = if config.type1.enabled { config.type1.farms.len() } else { 0 };

    let mut order: Vec<u32> = (0..config.n_apps).collect();
    order.shuffle(rng);
    let target_indices: Vec<u32> = order[..n_targets].to_vec();
    let farm_indices: Vec<u32> = order[n_targets..n_targets + n_farms].to_vec();
    let ordinary: Vec<u32> = order[n_targets + n_farms..].to_vec();

    let start = config.start_ts;
    let lead = i64::from(config.catalog.target_release_lead_days) * DAY;
    let spread = i64::from(config.catalog.target_release_spread_days) * DAY;

    let mut categories = vec![Category::Other; n_apps];
    let mut ratings = vec![0.0f64; n_apps];
    let mut releases = vec![0i64; n_apps];

    let target_mix = config.target_mix_vector();
    let target_labels = category_labels(&target_mix, n_targets, rng);
    let target_rating_params = if config.type2.co_rating_boost {
        (config.catalog.target_rating_mean, config.catalog.target_rating_sd)
    } else {
        (config.catalog.normal_rating_mean, config.catalog.normal_rating_sd)
    };
    for (slot, app) in target_indices.iter().enumerate() {
        let i = *app as usize;
        categories[i] = target_labels[slot];
        ratings[i] = sample_rating(rng, target_rating_params.0, target_rating_params.1);
        // Campaigns launch with the app: releases staggered across the early
        // window, with the first few forced live before the window opens so
        // bots always have a released target.
        releases[i] = if slot < 3 {
            start - rng.gen_range(1..=lead.max(1))
        } else {
            start - lead + rng.gen_range(0..spread.max(1))
        };
    }

    let ordinary_mix = config.catalog.mix_vector();
    let n_plain = ordinary.len() + farm_indices.len();
    let plain_labels = category_labels(&ordinary_mix, n_plain, rng);
    let n_new_ordinary = (config.catalog.new_normal_app_fraction * ordinary.len() as f64).round() as usize;
    for (slot, app) in farm_indices.iter().chain(ordinary.iter()).enumerate() {
        let i = *app as usize;
        categories[i] = plain_labels[slot];
        ratings[i] = sample_rating(rng, config.catalog.normal_rating_mean, config.catalog.normal_rating_sd);
        let is_new = slot >= farm_indices.len() && (slot - farm_indices.len()) < n_new_ordinary;
        releases[i] = if is_new {
            start - 3 * DAY + rng.gen_range(0..6 * DAY)
        } else {
            start - rng.gen_range(7 * DAY..730 * DAY)
        };
    }

    // Established ordinary apps get shuffled Zipf ranks; everything young or
    // fraud-dedicated sits at the tail of the popularity curve.
    let skew = config.legit.popularity_skew;
    let tail_weight = (n_apps as f64).powf(-skew);
    let mut popularity = vec![tail_weight; n_apps];
    let mut established: Vec<u32> = ordinary
        .iter()
        .copied()
        .filter(|a| releases[*a as usize] < start - 6 * DAY)
        .collect();
    established.shuffle(rng);
    for (rank, app) in established.iter().enumerate() {
        popularity[*app as usize] = (rank as f64 + 1.0).powf(-skew);
    }

    let width = (n_apps as f64).log10().ceil().max(1.0) as usize;
    let entries: Vec<AppCatalogEntry> = (0..n_apps)
        .map(|i| AppCatalogEntry {
            app_id: format!("app_{i:0width$}"),
            category: categories[i],
            rating: ratings[i],
            release_ts: releases[i],
        })
        .collect();

    let mut cumulative = Vec::with_capacity(n_apps);
    let mut acc = 0.0;
    for w in &popularity {
        acc += w;
        cumulative.push(acc);
    }

    CatalogPlan { entries, target_indices, farm_indices, popularity, cumulative }
}
