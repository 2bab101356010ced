//! Neighbourhood competition features for each point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::GridIndex;
use crate::pattern::{DistanceMetric, Window};
use crate::time_mapping::TemporalPattern;

pub const COMPETITION_FEATURES: [&str; 6] = [
    "nn_dist",
    "n_neighbors",
    "avg_neighbor_dist",
    "nn_arrival_time",
    "sum_neighbor_times",
    "nn_dist_time_ratio",
];

/// Smallest arrival time used as the denominator of the distance/time ratio.
pub const RATIO_TIME_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCorrection {
    #[default]
    None,
    Toroidal,
    /// Focal points closer than the radius to the boundary are dropped.
    Truncation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionIndices {
    /// Indices of the focal points that received a row.
    pub kept: Vec<usize>,
    pub rows: Vec<[f64; 6]>,
}

/// Competition indices of a time-ordered pattern; isolated points take
/// `t_max` from the latest event time.
pub fn competition_indices(events: &TemporalPattern, radius: f64, edge: EdgeCorrection) -> Result<CompetitionIndices> {
    let times = events.times();
    let t_max = times.iter().copied().fold(0.0, f64::max);
    competition_indices_raw(&events.locations(), &times, &events.window, radius, edge, t_max)
}

/// Competition indices over every other point within `radius`, regardless of arrival order.
///
/// An isolated point gets `(radius, 0, 0, t_max, 0, radius / t_max)`.
pub fn competition_indices_raw(
    locs: &[(f64, f64)],
    times: &[f64],
    window: &Window,
    radius: f64,
    edge: EdgeCorrection,
    t_max: f64,
) -> Result<CompetitionIndices> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("competition radius must be positive"));
    }
    if locs.len() != times.len() {
        return Err(Error::invalid("locations and times differ in length"));
    }
    let n = locs.len();
    let mut neighbours: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    match edge {
        EdgeCorrection::Toroidal => {
            let metric = DistanceMetric::Toroidal(*window);
            for i in 0..n {
                for j in (i + 1)..n {
                    let d = metric.distance(locs[i], locs[j]);
                    if d <= radius {
                        neighbours[i].push((j, d));
                        neighbours[j].push((i, d));
                    }
                }
            }
        }
        EdgeCorrection::None | EdgeCorrection::Truncation => {
            let index = GridIndex::new(locs);
            for (i, nb) in neighbours.iter_mut().enumerate() {
                index.within(locs[i], radius, |j, d| {
                    if j != i {
                        nb.push((j, d));
                    }
                });
                nb.sort_by_key(|&(j, _)| j);
            }
        }
    }

    let mut kept = Vec::new();
    let mut rows = Vec::new();
    for (i, nb) in neighbours.iter().enumerate() {
        if edge == EdgeCorrection::Truncation && window.boundary_distance(locs[i].0, locs[i].1) < radius {
            continue;
        }
        kept.push(i);
        if nb.is_empty() {
            rows.push([radius, 0.0, 0.0, t_max, 0.0, radius / t_max.max(RATIO_TIME_FLOOR)]);
            continue;
        }
        // nearest neighbour, ties to the lowest index
        let &(nn, nn_dist) = nb
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("non-empty neighbourhood");
        let count = nb.len() as f64;
        let avg = nb.iter().map(|p| p.1).sum::<f64>() / count;
        let time_sum: f64 = nb.iter().map(|p| times[p.0]).sum();
        let nn_time = times[nn];
        rows.push([nn_dist, count, avg, nn_time, time_sum, nn_dist / nn_time.max(RATIO_TIME_FLOOR)]);
    }
    Ok(CompetitionIndices { kept, rows })
}
