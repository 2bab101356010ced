//! Carrying optimizer candidates from a coarse grid to a finer one.

use serde::{Deserialize, Serialize};

use super::{guarded, Bounds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescoreControl {
    pub enabled: bool,
    pub top: usize,
    pub objective_tol: f64,
    pub param_tol: f64,
    pub avoid_bound_solutions: bool,
    pub bound_eps: f64,
}

impl Default for RescoreControl {
    fn default() -> Self {
        RescoreControl {
            enabled: true,
            top: 5,
            objective_tol: 1e-6,
            param_tol: 0.10,
            avoid_bound_solutions: true,
            bound_eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Deduplicates, keeps the best `top`, re-evaluates them with `finer` and ranks them.
///
/// Two candidates are duplicates when every coordinate differs by at most
/// `param_tol` times the width of its bound interval. With
/// `avoid_bound_solutions`, a candidate touching a bound is ranked after an
/// interior one whose value is within `objective_tol` (relative) of it.
/// When rescoring is disabled the best `top` are returned with their coarse values.
pub fn rescore_candidates<F>(candidates: &[Candidate], finer: F, bounds: &Bounds, control: &RescoreControl) -> Vec<Candidate>
where
    F: Fn(&[f64]) -> f64,
{
    let mut sorted: Vec<Candidate> = candidates.to_vec();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));

    let mut kept: Vec<Candidate> = Vec::new();
    for c in sorted {
        let duplicate = kept.iter().any(|k| {
            c.x.iter().zip(&k.x).enumerate().all(|(i, (a, b))| (a - b).abs() <= control.param_tol * bounds.width(i))
        });
        if !duplicate {
            kept.push(c);
        }
        if kept.len() == control.top.max(1) {
            break;
        }
    }
    if !control.enabled {
        return kept;
    }

    for c in &mut kept {
        c.value = guarded(&finer, &c.x);
    }
    kept.sort_by(|a, b| a.value.total_cmp(&b.value));

    if control.avoid_bound_solutions {
        let on_bound: Vec<bool> = kept.iter().map(|c| bounds.near_boundary(&c.x, control.bound_eps)).collect();
        let mut flags = on_bound;
        // bubble interior candidates past comparable boundary ones
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..kept.len().saturating_sub(1) {
                let comparable = kept[i + 1].value
                    <= kept[i].value + control.objective_tol * kept[i].value.abs().max(1.0);
                if flags[i] && !flags[i + 1] && comparable {
                    kept.swap(i, i + 1);
                    flags.swap(i, i + 1);
                    changed = true;
                }
            }
        }
    }
    kept
}
