//! Self-correcting conditional intensity and its quadrature log-likelihood.
//!
//! The intensity factorises into a temporal rate
//! `exp(alpha1 + beta1 t - gamma1 N(t))`, a spatial inhibition density built
//! from the pairwise term `psi`, and a spatio-temporal interaction
//! `exp(-alpha3 #{close, sufficiently older events})`. The negative
//! log-likelihood sums the log-intensity over the events and subtracts the
//! integral of the intensity over `(0, t_n) x window`, approximated with the
//! midpoint rule on a regular `n_t x n_x x n_y` grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::Window;
use crate::time_mapping::{strictly_increasing, TemporalPattern};

/// The eight self-correcting parameters in output order
/// `(alpha1, beta1, gamma1, alpha2, beta2, alpha3, beta3, gamma3)`.
///
/// `alpha3, beta3, gamma3` are the spatio-temporal interaction strength,
/// radius and minimum time lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScParameters {
    pub alpha1: f64,
    pub beta1: f64,
    pub gamma1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub alpha3: f64,
    pub beta3: f64,
    pub gamma3: f64,
}

impl ScParameters {
    pub const DIM: usize = 8;
    pub const NAMES: [&'static str; 8] = [
        "alpha1", "beta1", "gamma1", "alpha2", "beta2", "alpha3", "beta3", "gamma3",
    ];

    pub fn from_array(v: [f64; 8]) -> Self {
        ScParameters {
            alpha1: v[0],
            beta1: v[1],
            gamma1: v[2],
            alpha2: v[3],
            beta2: v[4],
            alpha3: v[5],
            beta3: v[6],
            gamma3: v[7],
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        let arr: [f64; 8] = v
            .try_into()
            .map_err(|_| Error::invalid(format!("expected 8 parameters, got {}", v.len())))?;
        Ok(Self::from_array(arr))
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.alpha1,
            self.beta1,
            self.gamma1,
            self.alpha2,
            self.beta2,
            self.alpha3,
            self.beta3,
            self.gamma3,
        ]
    }

    /// Checks finiteness and non-negativity of every constrained coordinate.
    pub fn validate(&self) -> Result<()> {
        let v = self.to_array();
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("{} is not finite", Self::NAMES[i])));
        }
        if let Some(i) = (1..8).find(|&i| v[i] < 0.0) {
            return Err(Error::Domain(format!("{} = {} must be non-negative", Self::NAMES[i], v[i])));
        }
        Ok(())
    }

    /// Zeroes the interaction radius and lag when the interaction is switched off.
    pub fn canonical(mut self) -> Self {
        if self.alpha3 == 0.0 {
            self.beta3 = 0.0;
            self.gamma3 = 0.0;
        }
        self
    }
}

/// Grid resolution `(n_t, n_x, n_y)` of one quadrature level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct GridLevel {
    pub n_t: usize,
    pub n_x: usize,
    pub n_y: usize,
}

impl GridLevel {
    pub fn new(n_t: usize, n_x: usize, n_y: usize) -> Self {
        GridLevel { n_t, n_x, n_y }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t < 2 || self.n_x < 2 || self.n_y < 2 {
            return Err(Error::invalid(format!("grid resolution {self:?} must be at least 2 per axis")));
        }
        Ok(())
    }
}

impl From<[usize; 3]> for GridLevel {
    fn from(v: [usize; 3]) -> Self {
        GridLevel::new(v[0], v[1], v[2])
    }
}

impl From<GridLevel> for [usize; 3] {
    fn from(g: GridLevel) -> Self {
        [g.n_t, g.n_x, g.n_y]
    }
}

/// Integration bounds `(t, x, y)` and resolution levels, coarsest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSchedule {
    pub upper_bounds: [f64; 3],
    pub levels: Vec<GridLevel>,
}

impl QuadratureSchedule {
    pub fn single(upper_bounds: [f64; 3], level: GridLevel) -> Self {
        QuadratureSchedule {
            upper_bounds,
            levels: vec![level],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.upper_bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::invalid("grid upper bounds must be positive"));
        }
        if self.levels.is_empty() {
            return Err(Error::invalid("grid schedule has no levels"));
        }
        self.levels.iter().try_for_each(GridLevel::validate)
    }
}

/// Time-ordered event history with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventHistory {
    times: Vec<f64>,
    locs: Vec<(f64, f64)>,
}

impl EventHistory {
    pub fn new(times: Vec<f64>, locs: Vec<(f64, f64)>) -> Result<Self> {
        if times.len() != locs.len() {
            return Err(Error::invalid("history times and locations differ in length"));
        }
        if times.first().is_some_and(|&t| !(t >= 0.0)) {
            return Err(Error::invalid("history times must be non-negative"));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("history times must be strictly increasing"));
        }
        Ok(EventHistory { times, locs })
    }

    /// History of a time-ordered pattern, with tied times separated by the
    /// smallest representable increment.
    pub fn from_pattern(pattern: &TemporalPattern) -> Self {
        EventHistory {
            times: strictly_increasing(&pattern.times()),
            locs: pattern.locations(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn locations(&self) -> &[(f64, f64)] {
        &self.locs
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of events strictly before `t`.
    pub fn count_before(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    pub fn prefix(&self, n: usize) -> EventHistory {
        EventHistory {
            times: self.times[..n].to_vec(),
            locs: self.locs[..n].to_vec(),
        }
    }
}

pub fn temporal_intensity(params: &ScParameters, t: f64, history: &EventHistory) -> f64 {
    let n = history.count_before(t) as f64;
    (params.alpha1 + params.beta1 * t - params.gamma1 * n).exp()
}

/// Exact integral of the piecewise log-linear temporal intensity over `[0, t]`.
pub fn integrated_temporal_intensity(params: &ScParameters, t: f64, history: &EventHistory) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let segment = |a: f64, b: f64, count: usize| -> f64 {
        let base = params.alpha1 - params.gamma1 * count as f64 + params.beta1 * a;
        if params.beta1 == 0.0 {
            base.exp() * (b - a)
        } else {
            base.exp() * (params.beta1 * (b - a)).exp_m1() / params.beta1
        }
    };
    let mut total = 0.0;
    let mut start = 0.0;
    let mut count = history.count_before(0.0) + history.times.iter().filter(|&&s| s == 0.0).count();
    for &s in history.times.iter().filter(|&&s| s > 0.0 && s < t) {
        total += segment(start, s, count);
        start = s;
        count += 1;
    }
    total + segment(start, t, count)
}

/// Pairwise inhibition `(r / alpha2)^beta2` inside the range `alpha2`, 1 beyond.
pub fn psi(r: f64, params: &ScParameters) -> f64 {
    log_psi(r, params).exp()
}

#[inline]
pub fn log_psi(r: f64, params: &ScParameters) -> f64 {
    if params.alpha2 <= 0.0 || r > params.alpha2 || params.beta2 == 0.0 {
        0.0
    } else if r <= 0.0 {
        f64::NEG_INFINITY
    } else {
        params.beta2 * (r / params.alpha2).ln()
    }
}

#[inline]
fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn sum_log_psi(point: (f64, f64), earlier: &[(f64, f64)], params: &ScParameters) -> f64 {
    earlier.iter().map(|&q| log_psi(dist(point, q), params)).sum()
}

/// Log of `log(sum exp(v))` over the finite entries; `-inf` if there are none.
fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Log of the normalised spatial inhibition density at `point`, given the
/// locations of all earlier events, with the normalising constant evaluated
/// by the midpoint rule on the `n_x x n_y` grid of `level`.
pub fn spatial_log_density(
    point: (f64, f64),
    earlier: &EventHistory,
    params: &ScParameters,
    window: &Window,
    level: GridLevel,
) -> Result<f64> {
    level.validate()?;
    let cell_area = window.area() / (level.n_x * level.n_y) as f64;
    let logs: Vec<f64> = window
        .cell_centres(level.n_x, level.n_y)
        .into_iter()
        .map(|c| sum_log_psi(c, &earlier.locs, params))
        .collect();
    let log_c = log_sum_exp(&logs) + cell_area.ln();
    if !log_c.is_finite() {
        return Err(Error::NumericalDegeneracy {
            message: "spatial normalising constant underflowed on every grid cell".into(),
            params: params.to_array().to_vec(),
        });
    }
    Ok(sum_log_psi(point, &earlier.locs, params) - log_c)
}

/// `-alpha3` times the number of earlier events within distance `beta3`
/// that arrived at least `gamma3` before `t`.
pub fn interaction_log_f(event: (f64, f64, f64), history: &EventHistory, params: &ScParameters) -> f64 {
    if params.alpha3 == 0.0 {
        return 0.0;
    }
    let (t, x, y) = event;
    let count = history
        .times
        .iter()
        .zip(&history.locs)
        .filter(|(&s, &q)| s < t && t - s >= params.gamma3 && dist((x, y), q) <= params.beta3)
        .count();
    -params.alpha3 * count as f64
}

/// Negative log-likelihood of a time-ordered pattern on one quadrature level.
pub fn neg_log_likelihood(params: &ScParameters, pattern: &TemporalPattern, level: GridLevel) -> Result<f64> {
    LikelihoodContext::new(pattern, level)?.evaluate(params)
}

/// Precomputed geometry for repeated likelihood evaluations of one pattern on one level.
#[derive(Debug, Clone)]
pub struct LikelihoodContext {
    window: Window,
    level: GridLevel,
    times: Vec<f64>,
    locs: Vec<(f64, f64)>,
    cells: Vec<(f64, f64)>,
}

impl LikelihoodContext {
    pub fn new(pattern: &TemporalPattern, level: GridLevel) -> Result<Self> {
        Self::from_history(&EventHistory::from_pattern(pattern), pattern.window, level)
    }

    pub fn from_history(history: &EventHistory, window: Window, level: GridLevel) -> Result<Self> {
        level.validate()?;
        window.validate()?;
        if history.len() < 2 {
            return Err(Error::invalid("likelihood needs at least 2 events"));
        }
        if history.times[history.len() - 1] <= 0.0 {
            return Err(Error::invalid("last event time must be positive"));
        }
        Ok(LikelihoodContext {
            window,
            level,
            times: history.times.clone(),
            locs: history.locs.clone(),
            cells: window.cell_centres(level.n_x, level.n_y),
        })
    }

    pub fn level(&self) -> GridLevel {
        self.level
    }

    pub fn n_events(&self) -> usize {
        self.times.len()
    }

    /// Calls `f(cell)` for each cell centre within `radius` of `p`.
    fn cells_within(&self, p: (f64, f64), radius: f64, mut f: impl FnMut(usize, f64)) {
        let (nx, ny) = (self.level.n_x, self.level.n_y);
        let dx = self.window.width() / nx as f64;
        let dy = self.window.height() / ny as f64;
        let range = |c: f64, lo: f64, step: f64, n: usize| -> (usize, usize) {
            let a = ((c - radius - lo) / step - 0.5).ceil().max(0.0);
            let b = ((c + radius - lo) / step - 0.5).floor().min(n as f64 - 1.0);
            if b < a {
                (1, 0)
            } else {
                (a as usize, b as usize)
            }
        };
        let (ix0, ix1) = range(p.0, self.window.x_min, dx, nx);
        let (iy0, iy1) = range(p.1, self.window.y_min, dy, ny);
        if ix0 > ix1 || iy0 > iy1 {
            return;
        }
        for iy in iy0..=iy1 {
            for ix in ix0..=ix1 {
                let k = iy * nx + ix;
                let r = dist(self.cells[k], p);
                if r <= radius {
                    f(k, r);
                }
            }
        }
    }

    pub fn evaluate(&self, params: &ScParameters) -> Result<f64> {
        params.validate()?;
        let p = params;
        let n = self.times.len();
        let g = self.cells.len();
        let t_end = self.times[n - 1];
        let cell_area = self.window.area() / g as f64;
        let degenerate = |message: &str| Error::NumericalDegeneracy {
            message: message.to_string(),
            params: p.to_array().to_vec(),
        };

        // data term
        let mut data = 0.0;
        for i in 0..n {
            let (ti, yi) = (self.times[i], self.locs[i]);
            let mut log_h = 0.0;
            let mut close = 0usize;
            for j in 0..i {
                let r = dist(yi, self.locs[j]);
                log_h += log_psi(r, p);
                if p.alpha3 != 0.0 && r <= p.beta3 && ti - self.times[j] >= p.gamma3 {
                    close += 1;
                }
            }
            data += p.alpha1 + p.beta1 * ti - p.gamma1 * i as f64 + log_h - p.alpha3 * close as f64;
        }

        // sweep through time keeping per-cell log psi products and interaction counts
        let inhibits = p.alpha2 > 0.0 && p.beta2 > 0.0;
        let interacts = p.alpha3 != 0.0;
        let mut log_prod = vec![0.0f64; g];
        let mut counts = vec![0u32; g];
        let mut scratch = vec![0.0f64; g];
        let mut activated = 0usize;
        let mut interacting = 0usize;
        let mut log_norm_sum = 0.0;

        let activate = |j: usize, log_prod: &mut Vec<f64>, scratch: &mut Vec<f64>| -> Result<f64> {
            // normalising constant for event j uses events before it
            let log_c = if inhibits && j > 0 {
                scratch.copy_from_slice(log_prod);
                log_sum_exp(scratch) + cell_area.ln()
            } else {
                (g as f64 * cell_area).ln()
            };
            if !log_c.is_finite() {
                return Err(degenerate("spatial normalising constant underflowed"));
            }
            if inhibits {
                self.cells_within(self.locs[j], p.alpha2, |k, r| {
                    log_prod[k] += log_psi(r, p);
                });
            }
            Ok(log_c)
        };

        let dt = t_end / self.level.n_t as f64;
        let mut integral = 0.0;
        for m in 0..self.level.n_t {
            let tau = (m as f64 + 0.5) * dt;
            while activated < n && self.times[activated] < tau {
                log_norm_sum += activate(activated, &mut log_prod, &mut scratch)?;
                activated += 1;
            }
            if interacts {
                while interacting < activated && tau - self.times[interacting] >= p.gamma3 {
                    self.cells_within(self.locs[interacting], p.beta3, |k, _| counts[k] += 1);
                    interacting += 1;
                }
            }
            let rate = (p.alpha1 + p.beta1 * tau - p.gamma1 * activated as f64).exp();
            let spatial = if interacts {
                let max = if inhibits {
                    log_prod.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                } else {
                    0.0
                };
                if max == f64::NEG_INFINITY {
                    return Err(degenerate("spatial density vanishes on every grid cell"));
                }
                let (mut num, mut den) = (0.0, 0.0);
                for k in 0..g {
                    let w = if inhibits { (log_prod[k] - max).exp() } else { 1.0 };
                    den += w;
                    if counts[k] == 0 {
                        num += w;
                    } else {
                        num += w * (-p.alpha3 * counts[k] as f64).exp();
                    }
                }
                num / den
            } else {
                1.0
            };
            integral += rate * spatial * dt;
        }
        while activated < n {
            log_norm_sum += activate(activated, &mut log_prod, &mut scratch)?;
            activated += 1;
        }

        let value = -(data - log_norm_sum) + integral;
        if !value.is_finite() {
            return Err(degenerate("non-finite negative log-likelihood"));
        }
        Ok(value)
    }
}
