//! CART regression trees stored as flat node arrays.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_split: usize,
    pub min_leaf: usize,
    pub max_features: usize,
}

/// Node arrays; `feature[i] < 0` marks a leaf. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
    /// Training samples (with bootstrap multiplicity) that reached each node.
    pub samples: Vec<u32>,
}

/// Column-major feature matrix.
pub(crate) struct Columns<'a> {
    pub cols: &'a [Vec<f64>],
    pub y: &'a [f64],
}

struct Split {
    feature: usize,
    threshold: f64,
    /// `sum_l^2 / n_l + sum_r^2 / n_r`; larger is a bigger impurity drop.
    score: f64,
}

impl Tree {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        while self.feature[node] >= 0 {
            node = if x[self.feature[node] as usize] <= self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
        self.value[node]
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, n: usize) -> usize {
            if t.feature[n] < 0 {
                0
            } else {
                1 + walk(t, t.left[n] as usize).max(walk(t, t.right[n] as usize))
            }
        }
        if self.is_empty() {
            0
        } else {
            walk(self, 0)
        }
    }

    pub fn leaf_samples(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len())
            .filter(|&i| self.feature[i] < 0)
            .map(|i| self.samples[i])
    }

    fn push_leaf(&mut self, value: f64, samples: usize) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.samples.push(samples as u32);
        self.len() - 1
    }

    /// Grows a tree on the rows `sample` (duplicates allowed) of `data`.
    pub(crate) fn fit(data: &Columns<'_>, sample: Vec<usize>, params: &TreeParams, seed: u64) -> Tree {
        let mut rng = seed::rng(seed);
        let mut tree = Tree::default();
        let mut order: Vec<usize> = (0..data.cols.len()).collect();
        // (node, rows, depth)
        let mut stack = vec![(0usize, sample, 0usize)];
        let root_value = mean(data.y, &stack[0].1);
        tree.push_leaf(root_value, stack[0].1.len());
        while let Some((node, rows, depth)) = stack.pop() {
            if depth >= params.max_depth || rows.len() < params.min_split.max(2) {
                continue;
            }
            order.shuffle(&mut rng);
            let Some(split) = best_split(data, &rows, &order, params) else {
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| data.cols[split.feature][i] <= split.threshold);
            let li = tree.push_leaf(mean(data.y, &l), l.len());
            let ri = tree.push_leaf(mean(data.y, &r), r.len());
            tree.feature[node] = split.feature as i32;
            tree.threshold[node] = split.threshold;
            tree.left[node] = li as u32;
            tree.right[node] = ri as u32;
            stack.push((ri, r, depth + 1));
            stack.push((li, l, depth + 1));
        }
        tree
    }
}

fn mean(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
}

/// Scans features in `order` until `max_features` of them vary inside the
/// node. Equal scores keep the lower feature index, and within a feature the
/// lowest threshold.
fn best_split(data: &Columns<'_>, rows: &[usize], order: &[usize], p: &TreeParams) -> Option<Split> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&i| data.y[i]).sum();
    let parent = total * total / n as f64;
    let y_min = rows.iter().map(|&i| data.y[i]).fold(f64::INFINITY, f64::min);
    let y_max = rows.iter().map(|&i| data.y[i]).fold(f64::NEG_INFINITY, f64::max);
    if y_max - y_min <= 0.0 {
        return None;
    }
    let mut best: Option<Split> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut visited = 0;
    for &f in order {
        if visited == p.max_features {
            break;
        }
        let col = &data.cols[f];
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (col[i], data.y[i])));
        let (lo, hi) = pairs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(v, _)| (a.min(v), b.max(v)));
        if lo == hi {
            continue;
        }
        visited += 1;
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += pairs[i].1;
            let (nl, nr) = (i + 1, n - i - 1);
            if pairs[i].0 == pairs[i + 1].0 || nl < p.min_leaf || nr < p.min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
            let better = match &best {
                None => true,
                Some(b) => score > b.score || (score == b.score && f < b.feature),
            };
            if better {
                best = Some(Split {
                    feature: f,
                    threshold: 0.5 * (pairs[i].0 + pairs[i + 1].0),
                    score,
                });
            }
        }
    }
    best.filter(|b| b.score > parent * (1.0 + 1e-12) + 1e-12)
}
