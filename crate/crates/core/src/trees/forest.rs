//! Gini feature importance from a forest of randomized trees: bootstrapped
//! rows, random feature subsets per node, impurity decrease weighted by node
//! share, averaged over trees and normalized.

use std::io::Write as IoWrite;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, TreeError};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ImportanceParams {
    fn default() -> Self {
        ImportanceParams { n_trees: 60, max_depth: 12, seed: 42 }
    }
}

impl ImportanceParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.n_trees == 0 {
            return Err(TreeError::BadParams { msg: "importance needs at least 1 tree".into() });
        }
        if self.max_depth == 0 || self.max_depth > 64 {
            return Err(TreeError::BadParams { msg: "importance max_depth must be in 1..=64".into() });
        }
        Ok(())
    }
}

/// Normalized importance per feature, in dataset column order.
pub fn gini_importance(data: &Dataset, params: &ImportanceParams) -> Result<Vec<f64>, TreeError> {
    params.validate()?;
    data.check()?;
    let d = data.n_cols;

    // Trees are independent; summing per index order keeps the result
    // identical at any thread count.
    let per_tree: Vec<Vec<f64>> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(params.seed, Stream::Importance(i as u32));
            tree_importance(data, params.max_depth, &mut rng)
        })
        .collect();

    let mut total = vec![0.0; d];
    for tree in &per_tree {
        for (acc, v) in total.iter_mut().zip(tree) {
            *acc += v;
        }
    }
    for v in &mut total {
        *v /= params.n_trees as f64;
    }
    let sum: f64 = total.iter().sum();
    if sum <= 0.0 {
        return Err(TreeError::NoInformativeSplits);
    }
    for v in &mut total {
        *v /= sum;
    }
    Ok(total)
}

fn tree_importance(data: &Dataset, max_depth: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.n_rows();
    let rows: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n as u32)).collect();
    let mut importance = vec![0.0; data.n_cols];
    split_node(data, &rows, n as f64, max_depth, rng, &mut importance);
    importance
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

fn split_node(
    data: &Dataset,
    rows: &[u32],
    n_total: f64,
    depth_left: usize,
    rng: &mut ChaCha8Rng,
    importance: &mut [f64],
) {
    let pos = rows.iter().filter(|r| data.labels[**r as usize]).count() as u64;
    let neg = rows.len() as u64 - pos;
    if depth_left == 0 || rows.len() < 2 || pos == 0 || neg == 0 {
        return;
    }
    let parent_gini = super::gini_impurity(pos, neg).unwrap();

    let d = data.n_cols;
    let k = ((d as f64).sqrt().ceil() as usize).clamp(1, d);
    let mut features: Vec<usize> = rand::seq::index::sample(rng, d, k).into_iter().collect();
    features.sort_unstable();

    let mut best: Option<BestSplit> = None;
    for &j in &features {
        let mut order: Vec<u32> = rows.to_vec();
        order.sort_by(|a, b| {
            data.at(*a as usize, j)
                .partial_cmp(&data.at(*b as usize, j))
                .unwrap()
                .then(a.cmp(b))
        });
        let mut left_pos = 0u64;
        let mut left_n = 0u64;
        for w in 1..order.len() {
            let prev_row = order[w - 1] as usize;
            left_n += 1;
            if data.labels[prev_row] {
                left_pos += 1;
            }
            let prev = data.at(prev_row, j);
            let cur = data.at(order[w] as usize, j);
            if cur <= prev {
                continue;
            }
            let right_pos = pos - left_pos;
            let right_n = rows.len() as u64 - left_n;
            let gini_l = super::gini_impurity(left_pos, left_n - left_pos).unwrap();
            let gini_r = super::gini_impurity(right_pos, right_n - right_pos).unwrap();
            let nl = left_n as f64 / rows.len() as f64;
            let nr = right_n as f64 / rows.len() as f64;
            let decrease = parent_gini - nl * gini_l - nr * gini_r;
            let better = match &best {
                None => decrease > 0.0,
                Some(b) => decrease > b.decrease,
            };
            if better {
                best = Some(BestSplit { feature: j, threshold: 0.5 * (prev + cur), decrease });
            }
        }
    }

    let Some(best) = best else { return };
    importance[best.feature] += (rows.len() as f64 / n_total) * best.decrease;

    let mut left = Vec::new();
    let mut right = Vec::new();
    for &r in rows {
        if data.at(r as usize, best.feature) < best.threshold {
            left.push(r);
        } else {
            right.push(r);
        }
    }
    // depth-first, left first: the rng draw order is part of the contract
    split_node(data, &left, n_total, depth_left - 1, rng, importance);
    split_node(data, &right, n_total, depth_left - 1, rng, importance);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub importance: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceReport {
    /// Ranked descending by importance, ties by column order.
    pub fn new(names: &[String], importance: &[f64]) -> ImportanceReport {
        assert_eq!(names.len(), importance.len());
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by(|a, b| {
            importance[*b].partial_cmp(&importance[*a]).unwrap().then(a.cmp(b))
        });
        ImportanceReport {
            entries: order
                .iter()
                .enumerate()
                .map(|(rank, i)| ImportanceEntry {
                    feature: names[*i].clone(),
                    importance: importance[*i],
                    rank: rank + 1,
                })
                .collect(),
        }
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.rank)
    }
}

pub fn write_importance_csv<W: IoWrite>(out: &mut W, report: &ImportanceReport) -> std::io::Result<()> {
    writeln!(out, "feature,importance,rank")?;
    for e in &report.entries {
        writeln!(out, "{},{},{}", e.feature, e.importance, e.rank)?;
    }
    Ok(())
}
