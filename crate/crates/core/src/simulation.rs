//! Realizations of a fitted process: arrival times by thinning a dominating
//! Poisson process, locations by rejection, optional interaction thinning, then marks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::likelihood::{log_psi, ScParameters};
use crate::marks::{competition_indices_raw, extract_covariates, predict_marks, EdgeCorrection, RasterGrid, TrainedMarkModel};
use crate::pattern::Window;
use crate::rng;
use crate::time_mapping::{order_by_time, TimeMapping};

/// Largest mean of the dominating Poisson draw before a run is refused.
pub const MAX_DOMINATING_MEAN: f64 = 1e7;
/// Consecutive location rejections before the window is declared saturated.
pub const MAX_LOCATION_REJECTIONS: u64 = 1_000_000;

const STAGE_TIMES: u64 = 11;
const STAGE_LOCATIONS: u64 = 12;
const STAGE_THINNING: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MarkMode {
    #[default]
    MarkModel,
    TimeToSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub t_range: (f64, f64),
    /// Conditioning location; the fitted pattern's anchor when absent.
    pub anchor: Option<(f64, f64)>,
    pub thinning: bool,
    pub mark_mode: MarkMode,
    /// Competition radius for mark features; the trained model's when absent.
    pub radius: Option<f64>,
    pub edge_correction: Option<EdgeCorrection>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_range: (0.0, 1.0),
            anchor: None,
            thinning: true,
            mark_mode: MarkMode::MarkModel,
            radius: None,
            edge_correction: None,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, window: &Window) -> Result<()> {
        let (a, b) = self.t_range;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::invalid(format!("time range ({a}, {b}) is empty")));
        }
        if let Some((x, y)) = self.anchor {
            if !window.contains(x, y) {
                return Err(Error::invalid(format!("anchor ({x}, {y}) lies outside the window")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub mark: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SimDiagnostics {
    pub n_candidates: u64,
    pub n_time_accepted: u64,
    pub n_spatial_proposals: u64,
    pub n_thinned: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRealization {
    /// Time-ordered events; the first is the anchor.
    pub events: Vec<SimEvent>,
    pub diagnostics: SimDiagnostics,
    pub config: SimConfig,
    pub window: Window,
    pub parameters: ScParameters,
}

impl SimRealization {
    pub fn locations(&self) -> Vec<(f64, f64)> {
        self.events.iter().map(|e| (e.x, e.y)).collect()
    }

    pub fn marks(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.mark).collect()
    }
}

/// Where simulated marks come from.
#[derive(Debug, Clone, Copy)]
pub enum MarkSource<'a> {
    Model { model: &'a TrainedMarkModel, rasters: &'a [RasterGrid] },
    Mapping(TimeMapping),
}

/// Log of the dominating rate on `[t_min, t_max]`.
fn log_dominating_rate(params: &ScParameters, t_range: (f64, f64)) -> f64 {
    params.alpha1 + (params.beta1 * t_range.0).max(params.beta1 * t_range.1)
}

/// Probability of keeping a candidate at `t` with `n_before` earlier events.
pub fn acceptance_ratio(params: &ScParameters, t: f64, n_before: usize, t_range: (f64, f64)) -> f64 {
    let log_lambda = params.alpha1 + params.beta1 * t - params.gamma1 * n_before as f64;
    (log_lambda - log_dominating_rate(params, t_range)).exp()
}

fn check_gamma1(params: &ScParameters) -> Result<()> {
    if !(params.gamma1 >= 0.0) {
        return Err(Error::Domain(format!("gamma1 must be non-negative for simulation, got {}", params.gamma1)));
    }
    Ok(())
}

/// Accepted arrival times in `(t_min, t_max)`, with the anchor at `t_min` counted in the history.
///
/// Returns the times and the number of dominating candidates.
pub fn simulate_arrival_times(params: &ScParameters, t_range: (f64, f64), rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, u64)> {
    check_gamma1(params)?;
    let (t_min, t_max) = t_range;
    let mean = log_dominating_rate(params, t_range).exp() * (t_max - t_min);
    if !(mean <= MAX_DOMINATING_MEAN) {
        return Err(Error::Budget(format!(
            "dominating Poisson mean {mean} exceeds {MAX_DOMINATING_MEAN}"
        )));
    }
    let n_star = if mean > 0.0 {
        Poisson::new(mean).map_err(|e| Error::Budget(e.to_string()))?.sample(rng) as u64
    } else {
        0
    };
    let mut candidates: Vec<f64> = (0..n_star).map(|_| t_min + (t_max - t_min) * rng.random::<f64>()).collect();
    candidates.sort_by(f64::total_cmp);
    let mut accepted = Vec::new();
    for t in candidates {
        if t <= t_min {
            continue;
        }
        // the anchor sits at t_min and always counts
        let ratio = acceptance_ratio(params, t, accepted.len() + 1, t_range);
        if rng.random::<f64>() < ratio {
            accepted.push(t);
        }
    }
    Ok((accepted, n_star))
}

/// First uniform proposal in `window` accepted with probability `prod psi(r)` over `earlier`.
///
/// Returns the location and the number of proposals used.
pub fn sample_location(
    params: &ScParameters,
    earlier: &[(f64, f64)],
    window: &Window,
    rng: &mut ChaCha8Rng,
) -> Result<((f64, f64), u64)> {
    let inhibits = params.alpha2 > 0.0 && params.beta2 != 0.0;
    let mut proposals = 0u64;
    loop {
        proposals += 1;
        let x = window.x_min + window.width() * rng.random::<f64>();
        let y = window.y_min + window.height() * rng.random::<f64>();
        let log_accept = if inhibits {
            let mut s = 0.0;
            for &(px, py) in earlier {
                s += log_psi((x - px).hypot(y - py), params);
                if s == f64::NEG_INFINITY {
                    break;
                }
            }
            s
        } else {
            0.0
        };
        if log_accept == 0.0 || rng.random::<f64>().ln() < log_accept {
            return Ok(((x, y), proposals));
        }
        if proposals >= MAX_LOCATION_REJECTIONS {
            return Err(Error::Saturation {
                attempts: proposals,
                alpha2: params.alpha2,
                beta2: params.beta2,
            });
        }
    }
}

/// Indices of the `events` kept by sequential interaction thinning.
///
/// Each event survives with probability `exp(-alpha3 * k)`, where `k` counts
/// earlier kept events (and the anchor) within `beta3` that are at least `gamma3` older.
pub fn thin_by_interaction(
    events: &[(f64, f64, f64)],
    anchor: Option<(f64, f64, f64)>,
    params: &ScParameters,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    if params.alpha3 == 0.0 {
        return (0..events.len()).collect();
    }
    let mut kept_events: Vec<(f64, f64, f64)> = anchor.into_iter().collect();
    let mut kept = Vec::new();
    for (i, &(t, x, y)) in events.iter().enumerate() {
        let count = kept_events
            .iter()
            .filter(|&&(s, px, py)| s < t && t - s >= params.gamma3 && (x - px).hypot(y - py) <= params.beta3)
            .count();
        let keep = rng.random::<f64>() < (-params.alpha3 * count as f64).exp();
        if keep {
            kept.push(i);
            kept_events.push((t, x, y));
        }
    }
    kept
}

/// Event `(t, x, y)`.
pub type TimedPoint = (f64, f64, f64);

/// Unmarked realization: the anchor first, then the simulated events in time order.
pub fn simulate_points(
    params: &ScParameters,
    window: &Window,
    anchor: (f64, f64),
    t_range: (f64, f64),
    thinning: bool,
    seed: u64,
) -> Result<(Vec<TimedPoint>, SimDiagnostics)> {
    params.validate()?;
    let mut diag = SimDiagnostics::default();
    let (times, n_star) = simulate_arrival_times(params, t_range, &mut rng::stream(seed, STAGE_TIMES, 0))?;
    diag.n_candidates = n_star;
    diag.n_time_accepted = times.len() as u64;

    let mut loc_rng = rng::stream(seed, STAGE_LOCATIONS, 0);
    let mut locs = Vec::with_capacity(times.len() + 1);
    locs.push(anchor);
    for _ in &times {
        let (p, used) = sample_location(params, &locs, window, &mut loc_rng)?;
        diag.n_spatial_proposals += used;
        locs.push(p);
    }
    let events: Vec<(f64, f64, f64)> = times.iter().zip(&locs[1..]).map(|(&t, &(x, y))| (t, x, y)).collect();
    let anchor_event = (t_range.0, anchor.0, anchor.1);
    let kept = if thinning {
        thin_by_interaction(&events, Some(anchor_event), params, &mut rng::stream(seed, STAGE_THINNING, 0))
    } else {
        (0..events.len()).collect()
    };
    diag.n_thinned = (events.len() - kept.len()) as u64;
    let mut out = Vec::with_capacity(kept.len() + 1);
    out.push(anchor_event);
    out.extend(kept.into_iter().map(|i| events[i]));
    Ok((out, diag))
}

/// Size-to-time mapping recorded by a fit; requires the fit to carry its data.
pub fn fit_time_mapping(fit: &FitResult) -> Result<TimeMapping> {
    let data = fit
        .data
        .as_ref()
        .ok_or_else(|| Error::invalid("fit result does not carry its data pattern"))?;
    TimeMapping::from_sizes(data.points.iter().map(|p| p.size), fit.selected_delta)
}

fn fit_anchor(fit: &FitResult) -> Result<(f64, f64, f64, Option<f64>)> {
    let data = fit
        .data
        .as_ref()
        .ok_or_else(|| Error::invalid("no anchor given and the fit result does not carry its data pattern"))?;
    let tp = order_by_time(data, fit.selected_delta)?;
    let a = tp.anchor().ok_or_else(|| Error::invalid("fitted pattern is empty"))?;
    Ok((a.x, a.y, a.size, a.secondary))
}

/// Full marked realization of a fitted process.
pub fn simulate_mpp(fit: &FitResult, marks: MarkSource<'_>, config: &SimConfig) -> Result<SimRealization> {
    let window = fit.window;
    config.validate(&window)?;
    let observed_anchor = fit.data.as_ref().map(|_| fit_anchor(fit)).transpose()?;
    let anchor = match (config.anchor, observed_anchor) {
        (Some(a), _) => a,
        (None, Some((x, y, _, _))) => (x, y),
        (None, None) => return Err(Error::invalid("no anchor location available")),
    };
    let (points, diagnostics) = simulate_points(&fit.parameters, &window, anchor, config.t_range, config.thinning, config.seed)?;
    let times: Vec<f64> = points.iter().map(|p| p.0).collect();
    let locs: Vec<(f64, f64)> = points.iter().map(|p| (p.1, p.2)).collect();

    let mark_values = match (config.mark_mode, marks) {
        (MarkMode::TimeToSize, MarkSource::Mapping(mapping)) => {
            times.iter().map(|&t| mapping.time_to_size(t)).collect::<Result<Vec<f64>>>()?
        }
        (MarkMode::MarkModel, MarkSource::Model { model, rasters }) => {
            let metadata = model.metadata.as_ref();
            let radius = config
                .radius
                .or(metadata.map(|m| m.features.radius))
                .ok_or_else(|| Error::invalid("competition radius is not configured"))?;
            let edge = config
                .edge_correction
                .or(metadata.map(|m| m.features.edge_correction))
                .unwrap_or_default();
            // every simulated point needs a mark, so truncation falls back to no correction
            let edge = if edge == EdgeCorrection::Truncation { EdgeCorrection::None } else { edge };
            let ci = competition_indices_raw(&locs, &times, &window, radius, edge, config.t_range.1)?;
            let covariates = extract_covariates(rasters, &locs)?;
            let rows: Vec<Vec<f64>> = (0..locs.len())
                .map(|i| {
                    let mut row = vec![times[i], locs[i].0, locs[i].1];
                    row.extend_from_slice(&covariates[i]);
                    row.extend_from_slice(&ci.rows[i]);
                    row
                })
                .collect();
            let names = crate::marks::feature_names(&rasters.iter().map(|r| r.name.clone()).collect::<Vec<_>>());
            let mut values = predict_marks(model, &names, &rows)?;
            // the anchor keeps its observed mark when it is the fitted pattern's anchor
            if let (None, Some((_, _, size, secondary))) = (config.anchor, observed_anchor) {
                let secondary_response = metadata.is_some_and(|m| m.response == "secondary");
                values[0] = if secondary_response { secondary.unwrap_or(size) } else { size };
            }
            values
        }
        _ => return Err(Error::invalid("mark source does not match the configured mark mode")),
    };

    let events = points
        .iter()
        .zip(mark_values)
        .map(|(&(t, x, y), mark)| SimEvent { t, x, y, mark: mark.max(0.0) })
        .collect();
    Ok(SimRealization {
        events,
        diagnostics,
        config: config.clone(),
        window,
        parameters: fit.parameters,
    })
}
