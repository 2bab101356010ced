//! Bound-constrained maximum-likelihood fitting of the self-correcting process.

mod crs;
mod fit;
mod init;
mod rescore;
mod simplex;

pub use crs::minimize_global;
pub use fit::{fit_process, DeltaSpec, FitConfig, FitResult, Strategy, FIT_SCHEMA_VERSION};
pub use init::{default_initialization, Initialization};
pub use rescore::{rescore_candidates, Candidate, RescoreControl};
pub use simplex::minimize_local;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation budget and relative tolerances for one optimizer stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub maxeval: usize,
    pub ftol_rel: f64,
    pub xtol_rel: f64,
}

impl Budget {
    pub fn new(maxeval: usize, ftol_rel: f64, xtol_rel: f64) -> Self {
        Budget { maxeval, ftol_rel, xtol_rel }
    }

    pub fn validate(&self) -> Result<()> {
        if self.maxeval < 1 {
            return Err(Error::invalid("maxeval must be at least 1"));
        }
        if !(self.ftol_rel > 0.0 && self.xtol_rel > 0.0) {
            return Err(Error::invalid("ftol_rel and xtol_rel must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSchedule {
    pub global: Budget,
    pub local_first: Budget,
    pub local_refine: Budget,
}

impl BudgetSchedule {
    pub fn validate(&self) -> Result<()> {
        self.global.validate()?;
        self.local_first.validate()?;
        self.local_refine.validate()
    }
}

impl Default for BudgetSchedule {
    fn default() -> Self {
        BudgetSchedule {
            global: Budget::new(2000, 1e-5, 1e-4),
            local_first: Budget::new(2000, 1e-5, 1e-4),
            local_refine: Budget::new(1000, 1e-6, 1e-5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StartsConfig {
    pub global_restarts: usize,
    pub local_starts: usize,
    pub jitter_sd: f64,
    pub seed: u64,
}

impl Default for StartsConfig {
    fn default() -> Self {
        StartsConfig {
            global_restarts: 1,
            local_starts: 1,
            jitter_sd: 0.35,
            seed: 1,
        }
    }
}

impl StartsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.global_restarts < 1 || self.local_starts < 1 {
            return Err(Error::invalid("global_restarts and local_starts must be at least 1"));
        }
        if !(self.jitter_sd >= 0.0 && self.jitter_sd.is_finite()) {
            return Err(Error::invalid("jitter_sd must be non-negative"));
        }
        Ok(())
    }
}

/// Box constraints `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Bounds { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::invalid("bounds must be non-empty and of equal length"));
        }
        for (i, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(Error::invalid(format!("coordinate {i} has invalid bounds [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    /// Whether any coordinate lies within `eps` (relative to the box width) of a bound.
    pub fn near_boundary(&self, x: &[f64], eps: f64) -> bool {
        x.iter().enumerate().any(|(i, &v)| {
            let tol = eps * self.width(i).max(1.0);
            self.width(i) > 0.0 && (v - self.lower[i] <= tol || self.upper[i] - v <= tol)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    FtolReached,
    XtolReached,
    MaxevalReached,
    Failed,
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub status: Status,
}

/// Wraps an objective so that non-finite values become `+inf`.
pub(crate) fn guarded<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Relative spread test shared by both optimizers.
pub(crate) fn within_ftol(best: f64, worst: f64, ftol_rel: f64) -> bool {
    worst - best <= ftol_rel * 0.5 * (best.abs() + worst.abs()) || worst == best
}
