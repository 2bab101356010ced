//! Summary functions of marked patterns: L, F, G, J and the mark summaries E and V.
//!
//! Undefined values (past the support of a censored estimator, or where the
//! mark kernel sees no pairs) are stored as NaN and serialized as null.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::GridIndex;
use crate::pattern::{MarkedPattern, Window};

/// Dummy grid side used by the empty-space function.
pub const F_GRID: usize = 64;
pub const DEFAULT_N_R: usize = 128;
/// `J` is reported only where `F < 1 - J_SUPPORT_EPS`.
pub const J_SUPPORT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SummaryKind {
    L,
    F,
    G,
    J,
    E,
    V,
}

impl SummaryKind {
    pub const ALL: [SummaryKind; 6] = [SummaryKind::L, SummaryKind::F, SummaryKind::G, SummaryKind::J, SummaryKind::E, SummaryKind::V];

    pub fn label(self) -> &'static str {
        match self {
            SummaryKind::L => "L",
            SummaryKind::F => "F",
            SummaryKind::G => "G",
            SummaryKind::J => "J",
            SummaryKind::E => "E",
            SummaryKind::V => "V",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        SummaryKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown summary '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FgCorrection {
    #[default]
    Km,
    Rs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorOptions {
    pub n_r: usize,
    /// Defaults to a quarter of the shorter window side.
    pub r_max: Option<f64>,
    pub fg_correction: FgCorrection,
    /// Mark-kernel half-width; `0.15 * r_max` when absent.
    pub bandwidth: Option<f64>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            n_r: DEFAULT_N_R,
            r_max: None,
            fg_correction: FgCorrection::Km,
            bandwidth: None,
        }
    }
}

impl EstimatorOptions {
    /// Distance grid `0, .., r_max` for `window`.
    pub fn r_grid(&self, window: &Window) -> Result<Vec<f64>> {
        let half = 0.5 * window.width().min(window.height());
        let r_max = self.r_max.unwrap_or(0.5 * half);
        if !(r_max > 0.0 && r_max <= half) {
            return Err(Error::invalid(format!("r_max {r_max} must lie in (0, {half}]")));
        }
        if self.n_r < 2 {
            return Err(Error::invalid("the distance grid needs at least 2 points"));
        }
        Ok((0..self.n_r).map(|k| r_max * k as f64 / (self.n_r - 1) as f64).collect())
    }

    fn bandwidth_for(&self, r: &[f64]) -> Result<f64> {
        let b = self.bandwidth.unwrap_or(0.15 * r[r.len() - 1]);
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid(format!("mark bandwidth must be positive, got {b}")));
        }
        Ok(b)
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCurve {
    pub kind: SummaryKind,
    pub r: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub value: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub theoretical: Vec<f64>,
    /// Largest `r` with a defined value, when the curve is truncated.
    pub support: Option<f64>,
    /// Negative variance residues clamped to zero.
    #[serde(default)]
    pub clamped: usize,
}

impl SummaryCurve {
    fn new(kind: SummaryKind, r: &[f64], value: Vec<f64>, theoretical: Vec<f64>) -> Self {
        let last_defined = value.iter().rposition(|v| v.is_finite());
        let support = match last_defined {
            Some(k) if k + 1 == value.len() => None,
            Some(k) => Some(r[k]),
            None => Some(0.0),
        };
        SummaryCurve {
            kind,
            r: r.to_vec(),
            value,
            theoretical,
            support,
            clamped: 0,
        }
    }
}

fn require_points(pattern: &MarkedPattern) -> Result<()> {
    if pattern.len() < 2 {
        return Err(Error::invalid(format!("summaries need at least 2 points, got {}", pattern.len())));
    }
    Ok(())
}

fn intensity(pattern: &MarkedPattern) -> f64 {
    pattern.len() as f64 / pattern.window.area()
}

/// Index of the first grid value `>= d`.
fn first_at_least(r: &[f64], d: f64) -> usize {
    r.partition_point(|&x| x < d)
}

/// Ripley's K with translation correction.
pub fn k_function(pattern: &MarkedPattern, r: &[f64]) -> Result<Vec<f64>> {
    require_points(pattern)?;
    let w = &pattern.window;
    let locs = pattern.locations();
    let n = locs.len() as f64;
    let r_max = r[r.len() - 1];
    let mut bins = vec![0.0; r.len()];
    let index = GridIndex::new(&locs);
    for (i, &p) in locs.iter().enumerate() {
        index.within(p, r_max, |j, d| {
            if j != i {
                let (dx, dy) = (locs[j].0 - p.0, locs[j].1 - p.1);
                bins[first_at_least(r, d)] += w.area() / w.translated_overlap(dx, dy);
            }
        });
    }
    // lambda^2 estimated by n (n - 1) / |W|^2
    let scale = w.area() / (n * (n - 1.0));
    let mut acc = 0.0;
    Ok(bins
        .into_iter()
        .map(|b| {
            acc += b;
            acc * scale
        })
        .collect())
}

pub fn l_function(pattern: &MarkedPattern, options: &EstimatorOptions) -> Result<SummaryCurve> {
    let r = options.r_grid(&pattern.window)?;
    let k = k_function(pattern, &r)?;
    let l = k.iter().map(|&v| (v / std::f64::consts::PI).sqrt()).collect();
    Ok(SummaryCurve::new(SummaryKind::L, &r, l, r.clone()))
}

/// Censored distance distribution on `r`: observations `d` with censoring distances `c`.
fn censored_cdf(d: &[f64], c: &[f64], r: &[f64], correction: FgCorrection) -> Vec<f64> {
    match correction {
        FgCorrection::Rs => r
            .iter()
            .map(|&rk| {
                let (mut num, mut den) = (0usize, 0usize);
                for (&di, &ci) in d.iter().zip(c) {
                    if ci >= rk {
                        den += 1;
                        if di <= rk {
                            num += 1;
                        }
                    }
                }
                if den == 0 {
                    f64::NAN
                } else {
                    num as f64 / den as f64
                }
            })
            .collect(),
        FgCorrection::Km => {
            // observed time min(d, c), event when d <= c
            let mut obs: Vec<(f64, bool)> = d.iter().zip(c).map(|(&di, &ci)| (di.min(ci), di <= ci)).collect();
            obs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let last = obs.last().map_or(0.0, |o| o.0);
            let mut at_risk = obs.len();
            let mut surv = 1.0;
            let mut pos = 0;
            r.iter()
                .map(|&rk| {
                    while pos < obs.len() && obs[pos].0 <= rk {
                        let s = obs[pos].0;
                        let (mut events, mut leaving) = (0usize, 0usize);
                        while pos < obs.len() && obs[pos].0 == s {
                            events += obs[pos].1 as usize;
                            leaving += 1;
                            pos += 1;
                        }
                        if events > 0 {
                            surv *= 1.0 - events as f64 / at_risk as f64;
                        }
                        at_risk -= leaving;
                    }
                    if rk > last {
                        f64::NAN
                    } else {
                        1.0 - surv
                    }
                })
                .collect()
        }
    }
}

fn poisson_cdf(lambda: f64, r: &[f64]) -> Vec<f64> {
    r.iter().map(|&x| 1.0 - (-lambda * std::f64::consts::PI * x * x).exp()).collect()
}

fn g_values(pattern: &MarkedPattern, r: &[f64], correction: FgCorrection) -> Vec<f64> {
    let locs = pattern.locations();
    let index = GridIndex::new(&locs);
    let d: Vec<f64> = locs
        .iter()
        .enumerate()
        .map(|(i, &p)| index.nearest_excluding(p, i).map_or(f64::INFINITY, |(_, d)| d))
        .collect();
    let c: Vec<f64> = locs.iter().map(|&(x, y)| pattern.window.boundary_distance(x, y)).collect();
    censored_cdf(&d, &c, r, correction)
}

fn f_values(pattern: &MarkedPattern, r: &[f64], correction: FgCorrection) -> Vec<f64> {
    let locs = pattern.locations();
    let index = GridIndex::new(&locs);
    let dummies = pattern.window.cell_centres(F_GRID, F_GRID);
    let d: Vec<f64> = dummies.iter().map(|&q| index.nearest(q).map_or(f64::INFINITY, |(_, d)| d)).collect();
    let c: Vec<f64> = dummies.iter().map(|&(x, y)| pattern.window.boundary_distance(x, y)).collect();
    censored_cdf(&d, &c, r, correction)
}

fn j_values(g: &[f64], f: &[f64]) -> Vec<f64> {
    g.iter()
        .zip(f)
        .map(|(&gv, &fv)| {
            if gv.is_finite() && fv.is_finite() && fv < 1.0 - J_SUPPORT_EPS {
                (1.0 - gv) / (1.0 - fv)
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// Empty-space (`F`), nearest-neighbour (`G`) or `J` function.
pub fn nn_summary(pattern: &MarkedPattern, kind: SummaryKind, options: &EstimatorOptions) -> Result<SummaryCurve> {
    require_points(pattern)?;
    let r = options.r_grid(&pattern.window)?;
    let lambda = intensity(pattern);
    let corr = options.fg_correction;
    Ok(match kind {
        SummaryKind::G => SummaryCurve::new(kind, &r, g_values(pattern, &r, corr), poisson_cdf(lambda, &r)),
        SummaryKind::F => SummaryCurve::new(kind, &r, f_values(pattern, &r, corr), poisson_cdf(lambda, &r)),
        SummaryKind::J => {
            let j = j_values(&g_values(pattern, &r, corr), &f_values(pattern, &r, corr));
            SummaryCurve::new(kind, &r, j, vec![1.0; r.len()])
        }
        _ => return Err(Error::invalid(format!("{} is not a nearest-neighbour summary", kind.label()))),
    })
}

fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Kernel-weighted sums `(sum k, sum k m, sum k m^2)` over ordered pairs at each `r`.
fn mark_moments(pattern: &MarkedPattern, r: &[f64], b: f64) -> Vec<[f64; 3]> {
    let locs = pattern.locations();
    let marks: Vec<f64> = pattern.points.iter().map(|p| p.size).collect();
    let mut acc = vec![[0.0; 3]; r.len()];
    let index = GridIndex::new(&locs);
    let reach = r[r.len() - 1] + b;
    for (i, &p) in locs.iter().enumerate() {
        index.within(p, reach, |j, d| {
            if j == i {
                return;
            }
            let m = marks[i];
            for k in first_at_least(r, d - b)..r.len() {
                if r[k] > d + b {
                    break;
                }
                let w = epanechnikov((d - r[k]) / b);
                if w > 0.0 {
                    acc[k][0] += w;
                    acc[k][1] += w * m;
                    acc[k][2] += w * m * m;
                }
            }
        });
    }
    acc
}

/// Conditional mark mean (`E`) or variance (`V`) at interpoint distance `r`.
pub fn mark_summary(pattern: &MarkedPattern, kind: SummaryKind, options: &EstimatorOptions) -> Result<SummaryCurve> {
    require_points(pattern)?;
    if !matches!(kind, SummaryKind::E | SummaryKind::V) {
        return Err(Error::invalid(format!("{} is not a mark summary", kind.label())));
    }
    let r = options.r_grid(&pattern.window)?;
    let b = options.bandwidth_for(&r)?;
    let moments = mark_moments(pattern, &r, b);
    let n = pattern.len() as f64;
    let mean = pattern.points.iter().map(|p| p.size).sum::<f64>() / n;
    let var = pattern.points.iter().map(|p| (p.size - mean).powi(2)).sum::<f64>() / n;
    let mut clamped = 0;
    let value = moments
        .iter()
        .map(|&[w, wm, wm2]| {
            if w <= 0.0 {
                return f64::NAN;
            }
            let e = wm / w;
            match kind {
                SummaryKind::E => e,
                _ => {
                    let v = wm2 / w - e * e;
                    if v < 0.0 {
                        if v < -1e-9 {
                            clamped += 1;
                        }
                        0.0
                    } else {
                        v
                    }
                }
            }
        })
        .collect();
    let theory = vec![if kind == SummaryKind::E { mean } else { var }; r.len()];
    let mut curve = SummaryCurve::new(kind, &r, value, theory);
    curve.clamped = clamped;
    Ok(curve)
}

pub fn summary(pattern: &MarkedPattern, kind: SummaryKind, options: &EstimatorOptions) -> Result<SummaryCurve> {
    match kind {
        SummaryKind::L => l_function(pattern, options),
        SummaryKind::F | SummaryKind::G | SummaryKind::J => nn_summary(pattern, kind, options),
        SummaryKind::E | SummaryKind::V => mark_summary(pattern, kind, options),
    }
}

/// The requested summaries, sharing the F and G computations.
pub fn summaries(pattern: &MarkedPattern, kinds: &[SummaryKind], options: &EstimatorOptions) -> Result<Vec<SummaryCurve>> {
    require_points(pattern)?;
    let r = options.r_grid(&pattern.window)?;
    let corr = options.fg_correction;
    let lambda = intensity(pattern);
    let needs = |k: SummaryKind| kinds.contains(&k) || kinds.contains(&SummaryKind::J);
    let g = needs(SummaryKind::G).then(|| g_values(pattern, &r, corr));
    let f = needs(SummaryKind::F).then(|| f_values(pattern, &r, corr));
    kinds
        .iter()
        .map(|&kind| match kind {
            SummaryKind::G => Ok(SummaryCurve::new(kind, &r, g.clone().expect("computed"), poisson_cdf(lambda, &r))),
            SummaryKind::F => Ok(SummaryCurve::new(kind, &r, f.clone().expect("computed"), poisson_cdf(lambda, &r))),
            SummaryKind::J => Ok(SummaryCurve::new(
                kind,
                &r,
                j_values(g.as_ref().expect("computed"), f.as_ref().expect("computed")),
                vec![1.0; r.len()],
            )),
            _ => summary(pattern, kind, options),
        })
        .collect()
}
