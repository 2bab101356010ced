//! Windows, marked point patterns and distance primitives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed rectangular observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let w = Window {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::invalid(format!("degenerate window {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Distance from an interior location to the nearest window edge.
    pub fn boundary_distance(&self, x: f64, y: f64) -> f64 {
        (x - self.x_min)
            .min(self.x_max - x)
            .min(y - self.y_min)
            .min(self.y_max - y)
    }

    /// Area of the window intersected with itself shifted by `(dx, dy)`.
    pub fn translated_overlap(&self, dx: f64, dy: f64) -> f64 {
        (self.width() - dx.abs()).max(0.0) * (self.height() - dy.abs()).max(0.0)
    }

    /// Cell centres of a regular `nx` by `ny` grid covering the window,
    /// row by row from the bottom.
    pub fn cell_centres(&self, nx: usize, ny: usize) -> Vec<(f64, f64)> {
        let dx = self.width() / nx as f64;
        let dy = self.height() / ny as f64;
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let y = self.y_min + (j as f64 + 0.5) * dy;
            for i in 0..nx {
                out.push((self.x_min + (i as f64 + 0.5) * dx, y));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowGeometry {
    pub area: f64,
    pub diagonal: f64,
}

pub fn window_geometry(window: &Window) -> Result<WindowGeometry> {
    window.validate()?;
    Ok(WindowGeometry {
        area: window.area(),
        diagonal: window.diagonal(),
    })
}

/// A location with its primary size mark and an optional secondary mark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkedPoint {
    pub x: f64,
    pub y: f64,
    pub size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<f64>,
}

impl MarkedPoint {
    pub fn new(x: f64, y: f64, size: f64) -> Self {
        MarkedPoint {
            x,
            y,
            size,
            secondary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPattern {
    pub window: Window,
    pub points: Vec<MarkedPoint>,
}

impl MarkedPattern {
    pub fn new(window: Window, points: Vec<MarkedPoint>) -> Result<Self> {
        window.validate()?;
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) || !window.contains(p.x, p.y) {
                return Err(Error::invalid(format!(
                    "point {i} at ({}, {}) lies outside the window",
                    p.x, p.y
                )));
            }
            if !(p.size.is_finite() && p.size > 0.0) {
                return Err(Error::invalid(format!(
                    "point {i} has non-positive or non-finite size {}",
                    p.size
                )));
            }
            if let Some(s) = p.secondary {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::invalid(format!(
                        "point {i} has non-positive secondary mark {s}"
                    )));
                }
            }
        }
        Ok(MarkedPattern { window, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn locations(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.x, p.y)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMetric {
    Euclidean,
    /// Flat torus obtained by identifying opposite edges of the window.
    Toroidal(Window),
}

impl DistanceMetric {
    #[inline]
    pub fn distance(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let mut dx = (a.0 - b.0).abs();
        let mut dy = (a.1 - b.1).abs();
        if let DistanceMetric::Toroidal(w) = self {
            dx = dx.min(w.width() - dx).max(0.0);
            dy = dy.min(w.height() - dy).max(0.0);
        }
        dx.hypot(dy)
    }
}

/// Dense symmetric distance matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Largest pattern for which a dense matrix is materialised.
pub const DENSE_LIMIT: usize = 5000;

pub fn pairwise_distances(pattern: &MarkedPattern, metric: DistanceMetric) -> Result<DistanceMatrix> {
    let n = pattern.len();
    if n == 0 {
        return Err(Error::invalid("pairwise distances of an empty pattern"));
    }
    if n > DENSE_LIMIT {
        return Err(Error::invalid(format!(
            "{n} points exceed the dense distance limit of {DENSE_LIMIT}; use for_each_pair"
        )));
    }
    let locs = pattern.locations();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.distance(locs[i], locs[j]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, values })
}

/// Streams every unordered pair `(i, j, d)` with `i < j` without storing them.
pub fn for_each_pair(locs: &[(f64, f64)], metric: DistanceMetric, mut f: impl FnMut(usize, usize, f64)) {
    for i in 0..locs.len() {
        for j in (i + 1)..locs.len() {
            f(i, j, metric.distance(locs[i], locs[j]));
        }
    }
}

/// Five-number summary plus mean of nearest-neighbour distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
}

/// Per-point Euclidean nearest-neighbour distances.
pub fn nn_distances(locs: &[(f64, f64)]) -> Vec<f64> {
    let index = crate::neighbors::GridIndex::new(locs);
    (0..locs.len())
        .map(|i| index.nearest_excluding(locs[i], i).map_or(f64::INFINITY, |(_, d)| d))
        .collect()
}

pub fn nn_distance_summary(pattern: &MarkedPattern) -> Result<NnSummary> {
    if pattern.len() < 2 {
        return Err(Error::invalid("nearest-neighbour summary needs at least 2 points"));
    }
    let mut d = nn_distances(&pattern.locations());
    d.sort_by(f64::total_cmp);
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok(NnSummary {
        min: d[0],
        q1: quantile_sorted(&d, 0.25),
        median: quantile_sorted(&d, 0.5),
        mean,
        q3: quantile_sorted(&d, 0.75),
        max: d[d.len() - 1],
    })
}

/// Quantile by linear interpolation between order statistics (type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
