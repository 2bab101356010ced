//! Data-driven starting values and box bounds.

use serde::{Deserialize, Serialize};

use super::Bounds;
use crate::error::{Error, Result};
use crate::likelihood::{QuadratureSchedule, ScParameters};
use crate::pattern::{nn_distances, quantile_sorted};
use crate::time_mapping::TemporalPattern;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Initialization {
    pub init: ScParameters,
    pub bounds: Bounds,
}

/// Starting values and bounds derived from event counts, the observed time
/// span `dt` (the last event time) and nearest-neighbour spacing.
pub fn default_initialization(pattern: &TemporalPattern, schedule: &QuadratureSchedule) -> Result<Initialization> {
    schedule.validate()?;
    let n = pattern.len();
    if n < 2 {
        return Err(Error::invalid("initialization needs at least 2 events"));
    }
    let times = pattern.times();
    let dt = times[n - 1];
    if !(dt > 0.0) {
        return Err(Error::invalid("events must span a positive time interval"));
    }
    let window = pattern.window;
    let diag = window.diagonal();
    let nf = n as f64;

    let alpha1 = (nf / dt).ln();
    let gamma1 = nf.ln() / nf;
    let beta1 = poisson_slope(&times, dt).unwrap_or(std::f64::consts::LN_2 / dt).clamp(0.0, 20.0 / dt);

    let mut nn = nn_distances(&pattern.locations());
    nn.retain(|d| d.is_finite());
    nn.sort_by(f64::total_cmp);
    let median = if nn.is_empty() { 0.0 } else { quantile_sorted(&nn, 0.5) };
    let alpha2 = if median > 0.0 { median.min(diag) } else { (window.area() / nf).sqrt() / 2.0 };

    let init = ScParameters {
        alpha1,
        beta1,
        gamma1,
        alpha2,
        beta2: 1.0,
        alpha3: 0.1,
        beta3: alpha2,
        gamma3: 0.05 * dt,
    };
    let lower = vec![alpha1 - 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let upper = vec![
        alpha1 + 10.0,
        20.0 / dt,
        (10.0 * gamma1).max(1.0),
        diag,
        10.0,
        10.0,
        diag,
        dt,
    ];
    Ok(Initialization {
        init,
        bounds: Bounds::new(lower, upper)?,
    })
}

/// Slope of a log-linear Poisson regression of binned event counts on bin
/// centre, with the log bin width as offset; `None` if Newton fails.
fn poisson_slope(times: &[f64], dt: f64) -> Option<f64> {
    let bins = (times.len() as f64).sqrt().ceil().max(2.0) as usize;
    let width = dt / bins as f64;
    let mut counts = vec![0.0; bins];
    for &t in times {
        let b = ((t / width) as usize).min(bins - 1);
        counts[b] += 1.0;
    }
    let centres: Vec<f64> = (0..bins).map(|b| (b as f64 + 0.5) * width).collect();
    let total: f64 = counts.iter().sum();
    let (mut a, mut beta) = ((total / (bins as f64 * width)).ln(), 0.0);
    for _ in 0..100 {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (c, &x) in counts.iter().zip(&centres) {
            let mu = (a + beta * x + width.ln()).exp();
            g0 += c - mu;
            g1 += (c - mu) * x;
            h00 += mu;
            h01 += mu * x;
            h11 += mu * x * x;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det.is_finite() && det > 0.0) {
            return None;
        }
        let da = (h11 * g0 - h01 * g1) / det;
        let db = (h00 * g1 - h01 * g0) / det;
        a += da;
        beta += db;
        if !(a.is_finite() && beta.is_finite()) {
            return None;
        }
        if da.abs() < 1e-10 && db.abs() < 1e-10 * beta.abs().max(1.0) {
            return Some(beta);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::GridLevel;
    use crate::pattern::Window;
    use crate::time_mapping::TemporalEvent;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schedule() -> QuadratureSchedule {
        QuadratureSchedule::single([1.0, 10.0, 10.0], GridLevel::new(10, 10, 10))
    }

    fn temporal(times: &[f64], rng: &mut impl Rng) -> TemporalPattern {
        let w = Window::new(0.0, 10.0, 0.0, 10.0).unwrap();
        let events = times
            .iter()
            .map(|&t| TemporalEvent {
                t,
                x: rng.random_range(0.0..10.0),
                y: rng.random_range(0.0..10.0),
                size: 1.0,
                secondary: None,
            })
            .collect();
        TemporalPattern::from_events(w, events).unwrap()
    }

    #[test]
    fn count_based_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let times: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let init = default_initialization(&temporal(&times, &mut rng), &schedule()).unwrap();
        assert!((init.init.alpha1 - 100f64.ln()).abs() < 1e-12);
        assert!((init.init.alpha1 - 4.6052).abs() < 1e-4);
        assert!((init.init.gamma1 - 0.04605).abs() < 1e-5);
        assert!(init.bounds.contains(&init.init.to_array()));
        assert_eq!(init.init.beta2, 1.0);
    }

    #[test]
    fn flat_counts_give_small_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let mut times: Vec<f64> = (0..19_998).map(|_| rng.random::<f64>()).collect();
            times.push(0.0);
            times.push(1.0);
            let init = default_initialization(&temporal(&times, &mut rng), &schedule()).unwrap();
            assert!(init.init.beta1.abs() < 0.2, "{}", init.init.beta1);
        }
    }

    #[test]
    fn newton_recovers_a_known_slope() {
        // counts proportional to exp(2 t) on a fine grid
        let mut times = Vec::new();
        let m = 4000;
        for k in 0..m {
            let t = (k as f64 + 0.5) / m as f64;
            let reps = ((2.0 * t).exp() * 3.0).round() as usize;
            times.extend(std::iter::repeat_n(t, reps));
        }
        times.insert(0, 0.0);
        let slope = poisson_slope(&times, 1.0).unwrap();
        assert!((slope - 2.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn too_few_events() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tp = temporal(&[0.0], &mut rng);
        assert!(default_initialization(&tp, &schedule()).is_err());
    }
}
