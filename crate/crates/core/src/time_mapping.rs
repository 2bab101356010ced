//! Power-law mapping between primary size marks and arrival times on `[0, 1]`.
//!
//! Larger sizes map to earlier times: `t = 1 - ((s - s_min) / (s_max - s_min))^delta`,
//! so the largest point (the anchor) sits at `t = 0` and the smallest at `t = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{MarkedPattern, MarkedPoint, Window};

pub const MAX_DELTA: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeMapping {
    pub delta: f64,
    pub size_min: f64,
    pub size_max: f64,
}

pub fn validate_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= MAX_DELTA) {
        return Err(Error::Domain(format!("delta must lie in (0, {MAX_DELTA}], got {delta}")));
    }
    Ok(())
}

impl TimeMapping {
    pub fn new(delta: f64, size_min: f64, size_max: f64) -> Result<Self> {
        validate_delta(delta)?;
        if !(size_min.is_finite() && size_max.is_finite()) || size_min >= size_max {
            return Err(Error::DegenerateRange(format!(
                "size range [{size_min}, {size_max}] is empty"
            )));
        }
        Ok(TimeMapping {
            delta,
            size_min,
            size_max,
        })
    }

    /// Mapping spanning the observed size range.
    pub fn from_sizes(sizes: impl IntoIterator<Item = f64>, delta: f64) -> Result<Self> {
        let (lo, hi) = sizes
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
        TimeMapping::new(delta, lo, hi)
    }

    pub fn size_to_time(&self, size: f64) -> Result<f64> {
        if !(size >= self.size_min && size <= self.size_max) {
            return Err(Error::Range(format!(
                "size {size} outside [{}, {}]",
                self.size_min, self.size_max
            )));
        }
        let u = (size - self.size_min) / (self.size_max - self.size_min);
        Ok(1.0 - u.powf(self.delta))
    }

    pub fn time_to_size(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Range(format!("time {t} outside [0, 1]")));
        }
        Ok(self.size_min + (self.size_max - self.size_min) * (1.0 - t).powf(1.0 / self.delta))
    }
}

pub fn size_to_time(size: f64, mapping: &TimeMapping) -> Result<f64> {
    mapping.size_to_time(size)
}

pub fn time_to_size(t: f64, mapping: &TimeMapping) -> Result<f64> {
    mapping.time_to_size(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalEvent {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub size: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary: Option<f64>,
}

impl TemporalEvent {
    pub fn location(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Mark used as a regression response: the secondary mark when present.
    pub fn response(&self) -> f64 {
        self.secondary.unwrap_or(self.size)
    }
}

/// Events ordered by arrival time; `events[0]` is the anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalPattern {
    pub window: Window,
    pub events: Vec<TemporalEvent>,
    /// `permutation[k]` is the input index of `events[k]`.
    pub permutation: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<TimeMapping>,
}

impl TemporalPattern {
    /// Builds a pattern from events that already carry times, sorting them
    /// stably by time.
    pub fn from_events(window: Window, events: Vec<TemporalEvent>) -> Result<Self> {
        window.validate()?;
        for (i, e) in events.iter().enumerate() {
            if !e.t.is_finite() || !window.contains(e.x, e.y) {
                return Err(Error::invalid(format!("event {i} has invalid time or location")));
            }
        }
        let mut permutation: Vec<usize> = (0..events.len()).collect();
        permutation.sort_by(|&a, &b| events[a].t.total_cmp(&events[b].t).then(a.cmp(&b)));
        let events = permutation.iter().map(|&i| events[i]).collect();
        Ok(TemporalPattern {
            window,
            events,
            permutation,
            mapping: None,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn anchor(&self) -> Option<&TemporalEvent> {
        self.events.first()
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.t).collect()
    }

    pub fn locations(&self) -> Vec<(f64, f64)> {
        self.events.iter().map(|e| e.location()).collect()
    }

    /// Undoes the time ordering, returning points in their input order.
    pub fn restore_input_order(&self) -> MarkedPattern {
        let mut points = vec![MarkedPoint::new(0.0, 0.0, 0.0); self.events.len()];
        for (k, &orig) in self.permutation.iter().enumerate() {
            let e = &self.events[k];
            points[orig] = MarkedPoint {
                x: e.x,
                y: e.y,
                size: e.size,
                secondary: e.secondary,
            };
        }
        MarkedPattern {
            window: self.window,
            points,
        }
    }
}

/// Maps sizes to times and orders the events; ties keep their input order.
pub fn order_by_time(pattern: &MarkedPattern, delta: f64) -> Result<TemporalPattern> {
    if pattern.len() < 2 {
        return Err(Error::invalid("time ordering needs at least 2 points"));
    }
    let mapping = TimeMapping::from_sizes(pattern.points.iter().map(|p| p.size), delta)?;
    let events = pattern
        .points
        .iter()
        .map(|p| {
            Ok(TemporalEvent {
                t: mapping.size_to_time(p.size)?,
                x: p.x,
                y: p.y,
                size: p.size,
                secondary: p.secondary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = TemporalPattern::from_events(pattern.window, events)?;
    out.mapping = Some(mapping);
    Ok(out)
}

/// Makes a non-decreasing time sequence strictly increasing by nudging each
/// tied value up to the next representable float.
pub fn strictly_increasing(times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let t = match out.last() {
            Some(&prev) if t <= prev => f64::next_up(prev),
            _ => t,
        };
        out.push(t);
    }
    out
}
