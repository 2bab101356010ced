//! Regression trees grown level by level with exact greedy splits, and the
//! boosted and bagged ensembles built from them.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Flat binary tree; `feature[k] < 0` marks a leaf. Samples go left when
/// `x[feature] < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub value: Vec<f64>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            feature: vec![-1],
            threshold: vec![0.0],
            left: vec![0],
            right: vec![0],
            value: vec![value],
        }
    }

    /// A single split on `feature` at `threshold` with the given leaf values.
    pub fn stump(feature: usize, threshold: f64, below: f64, above: f64) -> Self {
        Tree {
            feature: vec![feature as i64, -1, -1],
            threshold: vec![threshold, 0.0, 0.0],
            left: vec![1, 0, 0],
            right: vec![2, 0, 0],
            value: vec![(below + above) / 2.0, below, above],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            let f = self.feature[k];
            if f < 0 {
                return self.value[k];
            }
            k = if x[f as usize] < self.threshold[k] { self.left[k] } else { self.right[k] };
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    fn push(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }
}

/// Column-major feature matrix with each column's row order presorted.
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
    n: usize,
}

impl Dataset {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        let columns: Vec<Vec<f64>> = (0..p).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
        let sorted = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();
        Dataset { columns, sorted, n }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per node; all when `>= p`.
    pub mtry: usize,
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows a squared-error tree on rows with positive `weight` (sample multiplicities).
pub fn grow_tree(data: &Dataset, target: &[f64], weight: &[u32], params: GrowParams, rng: &mut ChaCha8Rng) -> Tree {
    let p = data.n_features();
    let min_leaf = params.min_leaf.max(1) as f64;
    let mut node_of: Vec<usize> = weight.iter().map(|&w| if w > 0 { 0 } else { usize::MAX }).collect();
    let (w0, s0) = (0..data.n)
        .filter(|&r| weight[r] > 0)
        .fold((0.0, 0.0), |(w, s), r| (w + weight[r] as f64, s + weight[r] as f64 * target[r]));
    if w0 == 0.0 {
        return Tree::leaf(0.0);
    }
    let mut tree = Tree::leaf(s0 / w0);
    let mut stats: Vec<(f64, f64)> = vec![(w0, s0)];
    let mut frontier: Vec<usize> = if w0 >= 2.0 * min_leaf { vec![0] } else { vec![] };

    for _depth in 0..params.max_depth {
        if frontier.is_empty() || p == 0 {
            break;
        }
        let mut slot_of = vec![usize::MAX; tree.n_nodes()];
        for (s, &node) in frontier.iter().enumerate() {
            slot_of[node] = s;
        }
        let masks: Option<Vec<Vec<bool>>> = (params.mtry < p).then(|| {
            frontier
                .iter()
                .map(|_| {
                    let mut m = vec![false; p];
                    for f in sample(rng, p, params.mtry.max(1)).iter() {
                        m[f] = true;
                    }
                    m
                })
                .collect()
        });

        let m = frontier.len();
        let mut best: Vec<Option<Split>> = vec![None; m];
        let mut wl = vec![0.0; m];
        let mut sl = vec![0.0; m];
        let mut last = vec![0.0; m];
        for f in 0..p {
            wl.iter_mut().for_each(|v| *v = 0.0);
            sl.iter_mut().for_each(|v| *v = 0.0);
            let col = &data.columns[f];
            for &r in &data.sorted[f] {
                let r = r as usize;
                let node = node_of[r];
                if node == usize::MAX {
                    continue;
                }
                let s = slot_of[node];
                if s == usize::MAX || masks.as_ref().is_some_and(|ms| !ms[s][f]) {
                    continue;
                }
                let v = col[r];
                let (w_tot, s_tot) = stats[node];
                if wl[s] >= min_leaf && w_tot - wl[s] >= min_leaf && v > last[s] {
                    let wr = w_tot - wl[s];
                    let gain = sl[s] * sl[s] / wl[s] + (s_tot - sl[s]).powi(2) / wr - s_tot * s_tot / w_tot;
                    if best[s].is_none_or(|b| gain > b.gain) {
                        let mut threshold = 0.5 * (last[s] + v);
                        if threshold <= last[s] {
                            threshold = v;
                        }
                        best[s] = Some(Split { gain, feature: f, threshold });
                    }
                }
                let w = weight[r] as f64;
                wl[s] += w;
                sl[s] += w * target[r];
                last[s] = v;
            }
        }

        let mut children_of: Vec<Option<(usize, usize, Split)>> = vec![None; m];
        for (s, &node) in frontier.iter().enumerate() {
            let Some(split) = best[s] else { continue };
            let (w_tot, s_tot) = stats[node];
            if !(split.gain > 1e-12 * (s_tot * s_tot / w_tot).abs().max(1e-300)) {
                continue;
            }
            let l = tree.push(0.0);
            let r = tree.push(0.0);
            stats.push((0.0, 0.0));
            stats.push((0.0, 0.0));
            tree.feature[node] = split.feature as i64;
            tree.threshold[node] = split.threshold;
            tree.left[node] = l;
            tree.right[node] = r;
            children_of[s] = Some((l, r, split));
        }
        for r in 0..data.n {
            let node = node_of[r];
            if node == usize::MAX || node >= slot_of.len() || slot_of[node] == usize::MAX {
                continue;
            }
            if let Some((left, right, split)) = children_of[slot_of[node]] {
                let child = if data.columns[split.feature][r] < split.threshold { left } else { right };
                node_of[r] = child;
                let w = weight[r] as f64;
                stats[child].0 += w;
                stats[child].1 += w * target[r];
            }
        }
        let mut next = Vec::new();
        for &(l, r, _) in children_of.iter().flatten() {
            for c in [l, r] {
                let (w, s) = stats[c];
                tree.value[c] = s / w;
                if w >= 2.0 * min_leaf {
                    next.push(c);
                }
            }
        }
        frontier = next;
    }
    tree
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub subsample: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfParams {
    pub n_trees: usize,
    pub mtry: usize,
    pub min_leaf: usize,
}

/// Squared-loss gradient boosting; returns the base score and the trees.
pub fn fit_gbt(data: &Dataset, y: &[f64], params: &GbtParams, rng: &mut ChaCha8Rng) -> (f64, Vec<Tree>) {
    let n = data.n_rows();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let rows: Vec<Vec<f64>> = (0..n).map(|r| data.row(r)).collect();
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry: data.n_features(),
    };
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut weight = vec![0u32; n];
    for _ in 0..params.n_trees {
        let residual: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        if take < n {
            weight.iter_mut().for_each(|w| *w = 0);
            for r in sample(rng, n, take).iter() {
                weight[r] = 1;
            }
        } else {
            weight.iter_mut().for_each(|w| *w = 1);
        }
        let tree = grow_tree(data, &residual, &weight, grow, rng);
        for (f, row) in fitted.iter_mut().zip(&rows) {
            *f += params.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    (base, trees)
}

/// Random forest of bootstrap trees with `mtry` features tried per split.
pub fn fit_rf(data: &Dataset, y: &[f64], params: &RfParams, rng: &mut ChaCha8Rng) -> Vec<Tree> {
    let n = data.n_rows();
    let grow = GrowParams {
        max_depth: 32,
        min_leaf: params.min_leaf,
        mtry: params.mtry.clamp(1, data.n_features().max(1)),
    };
    (0..params.n_trees)
        .map(|_| {
            let mut weight = vec![0u32; n];
            for _ in 0..n {
                weight[rng.random_range(0..n)] += 1;
            }
            grow_tree(data, y, &weight, grow, rng)
        })
        .collect()
}
