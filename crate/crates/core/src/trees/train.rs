//! Second-order boosting on logistic loss with exact greedy split search.

use rand::Rng;

use super::{logistic, Dataset, Node, Tree, TreeEnsemble, TrainParams, TreeError, MODEL_FORMAT_VERSION};
use crate::rng::{stream_rng, Stream};

const NO_LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChosenSplit {
    pub feature: u32,
    pub threshold: f64,
    pub gain: f64,
}

/// One frontier node per boosting tree per level, as the trainer saw it.
#[derive(Debug, Clone)]
pub struct NodeTrace {
    pub tree_index: usize,
    pub depth: usize,
    /// Row ids at the node, ascending.
    pub rows: Vec<u32>,
    /// Gradient/hessian pairs aligned with `rows`.
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub lambda_l2: f64,
    pub min_child_weight: f64,
    pub chosen: Option<ChosenSplit>,
}

pub fn train(data: &Dataset, params: &TrainParams) -> Result<TreeEnsemble, TreeError> {
    train_impl(data, None, params, &mut None)
}

/// Training with per-row sample weights; `train` is the all-ones case.
pub fn train_weighted(
    data: &Dataset,
    weights: &[f64],
    params: &TrainParams,
) -> Result<TreeEnsemble, TreeError> {
    assert_eq!(weights.len(), data.n_rows(), "one weight per row");
    train_impl(data, Some(weights), params, &mut None)
}

/// Training that also records every frontier node and the split picked for
/// it, for oracle comparison against exhaustive search.
pub fn train_with_trace(
    data: &Dataset,
    params: &TrainParams,
) -> Result<(TreeEnsemble, Vec<NodeTrace>), TreeError> {
    let mut trace = Some(Vec::new());
    let model = train_impl(data, None, params, &mut trace)?;
    Ok((model, trace.unwrap()))
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: u32,
    threshold: f64,
}

fn train_impl(
    data: &Dataset,
    weights: Option<&[f64]>,
    params: &TrainParams,
    trace: &mut Option<Vec<NodeTrace>>,
) -> Result<TreeEnsemble, TreeError> {
    params.validate()?;
    data.check()?;
    let n = data.n_rows();
    let d = data.n_cols;
    let lambda = params.lambda_l2;

    let weight_of = |i: usize| weights.map_or(1.0, |w| w[i]);
    let pos_weight: f64 = (0..n).filter(|i| data.labels[*i]).map(weight_of).sum();
    let total_weight: f64 = (0..n).map(weight_of).sum();
    let prevalence = pos_weight / total_weight;
    let base_score = (prevalence / (1.0 - prevalence)).ln();

    // One global argsort per feature; every level reuses it.
    let sorted: Vec<Vec<u32>> = (0..d)
        .map(|j| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|a, b| {
                data.at(*a as usize, j)
                    .partial_cmp(&data.at(*b as usize, j))
                    .unwrap()
                    .then(a.cmp(b))
            });
            idx
        })
        .collect();

    let mut rng = stream_rng(params.seed, Stream::Train);
    let mut raw = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_trees);

    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for tree_index in 0..params.n_trees {
        for i in 0..n {
            let p = logistic(raw[i]);
            let w = weight_of(i);
            let y = if data.labels[i] { 1.0 } else { 0.0 };
            grad[i] = w * (p - y);
            hess[i] = w * (p * (1.0 - p));
        }

        let in_sample: Vec<bool> = if params.subsample < 1.0 {
            (0..n).map(|_| rng.gen::<f64>() < params.subsample).collect()
        } else {
            vec![true; n]
        };
        let columns: Vec<usize> = if params.colsample < 1.0 {
            let k = ((params.colsample * d as f64).ceil() as usize).clamp(1, d);
            let mut cols: Vec<usize> =
                rand::seq::index::sample(&mut rng, d, k).into_iter().collect();
            cols.sort_unstable();
            cols
        } else {
            (0..d).collect()
        };

        let tree = grow_tree(
            data,
            &sorted,
            &grad,
            &hess,
            &in_sample,
            &columns,
            params,
            lambda,
            tree_index,
            trace,
        );

        for i in 0..n {
            raw[i] += params.learning_rate * tree.eval(data.row(i));
        }
        trees.push(tree);
    }

    Ok(TreeEnsemble {
        format_version: MODEL_FORMAT_VERSION,
        params: *params,
        base_score,
        learning_rate: params.learning_rate,
        n_features: d,
        feature_manifest_hash: format!("{:016x}", crate::features::manifest_hash()),
        feature_names: data.feature_names.to_vec(),
        trees,
    })
}

// Gains that differ only by accumulation-order float noise count as ties, so
// the first candidate in scan order wins regardless of how the sums grouped.
fn tie_margin(a: f64, b: f64) -> f64 {
    1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[allow(clippy::too_many_arguments)]
fn grow_tree(
    data: &Dataset,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    in_sample: &[bool],
    columns: &[usize],
    params: &TrainParams,
    lambda: f64,
    tree_index: usize,
    trace: &mut Option<Vec<NodeTrace>>,
) -> Tree {
    let n = data.n_rows();
    // leaf_of holds the frontier slot of each row; slots map to arena ids.
    let mut leaf_of: Vec<u32> = (0..n).map(|i| if in_sample[i] { 0 } else { NO_LEAF }).collect();
    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut slot_arena: Vec<u32> = vec![0];

    for depth in 0..params.max_depth {
        let n_slots = slot_arena.len();
        let mut slot_g = vec![0.0; n_slots];
        let mut slot_h = vec![0.0; n_slots];
        for i in 0..n {
            let s = leaf_of[i];
            if s != NO_LEAF {
                slot_g[s as usize] += grad[i];
                slot_h[s as usize] += hess[i];
            }
        }

        let parent_score =
            |s: usize| slot_g[s] * slot_g[s] / (slot_h[s] + lambda);

        // Scan features in ascending order; strict > comparisons make ties
        // resolve to the lowest feature, then the lowest threshold.
        let mut best: Vec<Option<Best>> = vec![None; n_slots];
        let mut acc_g = vec![0.0; n_slots];
        let mut acc_h = vec![0.0; n_slots];
        let mut prev_val = vec![0.0f64; n_slots];
        let mut has_prev = vec![false; n_slots];
        for &j in columns {
            acc_g.iter_mut().for_each(|v| *v = 0.0);
            acc_h.iter_mut().for_each(|v| *v = 0.0);
            has_prev.iter_mut().for_each(|v| *v = false);
            for &r in &sorted[j] {
                let s = leaf_of[r as usize];
                if s == NO_LEAF {
                    continue;
                }
                let s = s as usize;
                let v = data.at(r as usize, j);
                if has_prev[s] && v > prev_val[s] {
                    let gl = acc_g[s];
                    let hl = acc_h[s];
                    let gr = slot_g[s] - gl;
                    let hr = slot_h[s] - hl;
                    if hl >= params.min_child_weight && hr >= params.min_child_weight {
                        let gain = 0.5
                            * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
                                - parent_score(s));
                        let better = match &best[s] {
                            None => gain > 0.0,
                            Some(b) => gain > b.gain + tie_margin(gain, b.gain),
                        };
                        if better {
                            best[s] = Some(Best {
                                gain,
                                feature: j as u32,
                                threshold: 0.5 * (prev_val[s] + v),
                            });
                        }
                    }
                }
                acc_g[s] += grad[r as usize];
                acc_h[s] += hess[r as usize];
                prev_val[s] = v;
                has_prev[s] = true;
            }
        }

        if let Some(sink) = trace.as_mut() {
            for s in 0..n_slots {
                let rows: Vec<u32> =
                    (0..n as u32).filter(|r| leaf_of[*r as usize] == s as u32).collect();
                sink.push(NodeTrace {
                    tree_index,
                    depth,
                    grad: rows.iter().map(|r| grad[*r as usize]).collect(),
                    hess: rows.iter().map(|r| hess[*r as usize]).collect(),
                    rows,
                    lambda_l2: lambda,
                    min_child_weight: params.min_child_weight,
                    chosen: best[s].map(|b| ChosenSplit {
                        feature: b.feature,
                        threshold: b.threshold,
                        gain: b.gain,
                    }),
                });
            }
        }

        // Split chosen slots; children become the next frontier.
        let mut next_slot_arena = Vec::new();
        let mut slot_children: Vec<Option<(u32, u32, u32, f64)>> = vec![None; n_slots];
        for s in 0..n_slots {
            if let Some(b) = best[s] {
                let left_arena = nodes.len() as u32;
                let right_arena = left_arena + 1;
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[slot_arena[s] as usize] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left: left_arena,
                    right: right_arena,
                };
                let left_slot = next_slot_arena.len() as u32;
                next_slot_arena.push(left_arena);
                let right_slot = next_slot_arena.len() as u32;
                next_slot_arena.push(right_arena);
                slot_children[s] = Some((left_slot, right_slot, b.feature, b.threshold));
            }
        }
        if next_slot_arena.is_empty() {
            break;
        }

        for i in 0..n {
            let s = leaf_of[i];
            if s == NO_LEAF {
                continue;
            }
            match slot_children[s as usize] {
                Some((left, right, feature, threshold)) => {
                    leaf_of[i] =
                        if data.at(i, feature as usize) < threshold { left } else { right };
                }
                // parent stays a leaf; the row is settled for this tree
                None => leaf_of[i] = NO_LEAF,
            }
        }
        // settled slots keep their arena leaves; value assignment needs their
        // totals, done below from the accumulated per-slot sums
        for s in 0..n_slots {
            if slot_children[s].is_none() {
                let value = -slot_g[s] / (slot_h[s] + lambda);
                nodes[slot_arena[s] as usize] = Node::Leaf { value };
            }
        }
        slot_arena = next_slot_arena;
    }

    // Frontier leaves remaining after the depth cap get their values here.
    let n_slots = slot_arena.len();
    let mut slot_g = vec![0.0; n_slots];
    let mut slot_h = vec![0.0; n_slots];
    for i in 0..n {
        let s = leaf_of[i];
        if s != NO_LEAF {
            slot_g[s as usize] += grad[i];
            slot_h[s as usize] += hess[i];
        }
    }
    for s in 0..n_slots {
        let value = -slot_g[s] / (slot_h[s] + lambda);
        nodes[slot_arena[s] as usize] = Node::Leaf { value };
    }

    Tree { nodes }
}
