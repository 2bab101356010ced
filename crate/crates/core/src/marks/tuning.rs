//! Space-filling hyperparameter designs, fold assignment and error metrics.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Rmse,
    Mae,
    Rsq,
}

impl Metric {
    /// Whether `a` is a strictly better score than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Metric::Rsq => a > b,
            Metric::Rmse | Metric::Mae => a < b,
        }
    }

    pub fn evaluate(self, truth: &[f64], pred: &[f64]) -> f64 {
        let n = truth.len() as f64;
        match self {
            Metric::Rmse => (truth.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt(),
            Metric::Mae => truth.iter().zip(pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / n,
            Metric::Rsq => {
                let mean = truth.iter().sum::<f64>() / n;
                let sst: f64 = truth.iter().map(|a| (a - mean).powi(2)).sum();
                let sse: f64 = truth.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
                if sst > 0.0 {
                    1.0 - sse / sst
                } else if sse == 0.0 {
                    1.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// `n` points of a Latin hypercube in `[0, 1)^d`, one per stratum on every axis.
#[allow(clippy::needless_range_loop)]
pub fn latin_hypercube(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut design = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, &s) in strata.iter().enumerate() {
            design[i][j] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    design
}

/// Fold index of every row; folds differ in size by at most one.
pub fn kfold_assignment(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut fold = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k;
    }
    fold
}

pub(crate) fn scale_int(u: f64, lo: usize, hi: usize) -> usize {
    (lo + (u * (hi - lo + 1) as f64).floor() as usize).min(hi)
}

pub(crate) fn scale_real(u: f64, lo: f64, hi: f64) -> f64 {
    lo + u * (hi - lo)
}
