//! Controlled random search with local mutation.

use rand::seq::index::sample;
use rand::Rng;

use super::{guarded, within_ftol, Bounds, Budget, OptimResult, Status};
use crate::error::{Error, Result};
use crate::rng;

/// Minimises `f` over the box; `start`, when given, joins the initial population.
///
/// The population holds `10 (d + 1)` points, reduced to the evaluation
/// budget when that is smaller.
pub fn minimize_global<F>(f: F, bounds: &Bounds, budget: &Budget, seed: u64, start: Option<&[f64]>) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    bounds.validate()?;
    budget.validate()?;
    let d = bounds.dim();
    let mut rng = rng::stream(seed, 0xC125, 0);
    let size = (10 * (d + 1)).min(budget.maxeval.max(d + 2));

    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(size);
    if let Some(s) = start {
        if s.len() != d {
            return Err(Error::invalid("start point has the wrong dimension"));
        }
        let mut x = s.to_vec();
        bounds.clamp(&mut x);
        pop.push(x);
    }
    while pop.len() < size {
        pop.push((0..d).map(|i| uniform(&mut rng, bounds.lower[i], bounds.upper[i])).collect());
    }
    let mut vals: Vec<f64> = pop.iter().map(|x| guarded(&f, x)).collect();
    let mut evals = size;
    let failed = vals.iter().filter(|v| v.is_infinite()).count();
    if 2 * failed > size {
        return Err(Error::DegenerateObjective { failed, total: size });
    }

    let status = loop {
        let (best, worst) = extremes(&vals);
        if evals >= budget.maxeval {
            break Status::MaxevalReached;
        }
        if within_ftol(vals[best], vals[worst], budget.ftol_rel) {
            break Status::FtolReached;
        }
        if population_collapsed(&pop, bounds, budget.xtol_rel) {
            break Status::XtolReached;
        }

        let trial = reflect(&pop, best, bounds, &mut rng);
        let ft = guarded(&f, &trial);
        evals += 1;
        if ft < vals[worst] {
            pop[worst] = trial;
            vals[worst] = ft;
            continue;
        }
        if evals >= budget.maxeval {
            break Status::MaxevalReached;
        }
        // local mutation around the best point
        let mut z: Vec<f64> = (0..d)
            .map(|i| {
                let w: f64 = rng.random();
                (1.0 + w) * pop[best][i] - w * trial[i]
            })
            .collect();
        bounds.clamp(&mut z);
        let fz = guarded(&f, &z);
        evals += 1;
        if fz < vals[worst] {
            pop[worst] = z;
            vals[worst] = fz;
        }
    };

    let (best, _) = extremes(&vals);
    Ok(OptimResult {
        x: pop[best].clone(),
        value: vals[best],
        evals,
        status,
    })
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Indices of the best and worst values; ties go to the lowest index.
fn extremes(vals: &[f64]) -> (usize, usize) {
    let mut best = 0;
    let mut worst = 0;
    for (i, &v) in vals.iter().enumerate() {
        if v < vals[best] {
            best = i;
        }
        if v > vals[worst] {
            worst = i;
        }
    }
    (best, worst)
}

fn population_collapsed(pop: &[Vec<f64>], bounds: &Bounds, xtol_rel: f64) -> bool {
    (0..bounds.dim()).all(|i| {
        let (lo, hi) = pop
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[i]), hi.max(x[i])));
        hi - lo <= xtol_rel * bounds.width(i)
    })
}

/// Reflects a random member through the centroid of the best point and
/// `d - 1` other random members; redraws when the reflection leaves the box.
fn reflect(pop: &[Vec<f64>], best: usize, bounds: &Bounds, rng: &mut impl Rng) -> Vec<f64> {
    let d = bounds.dim();
    let others: Vec<usize> = (0..pop.len()).filter(|&i| i != best).collect();
    let k = d.min(others.len());
    let mut trial = vec![0.0; d];
    for attempt in 0..100 {
        let picks = sample(rng, others.len(), k);
        let picks: Vec<usize> = picks.iter().map(|j| others[j]).collect();
        let (reflected, rest) = picks.split_last().expect("population has at least two members");
        for (i, t) in trial.iter_mut().enumerate() {
            let sum: f64 = pop[best][i] + rest.iter().map(|&j| pop[j][i]).sum::<f64>();
            let centroid = sum / (rest.len() + 1) as f64;
            *t = 2.0 * centroid - pop[*reflected][i];
        }
        if bounds.contains(&trial) || attempt == 99 {
            break;
        }
    }
    bounds.clamp(&mut trial);
    trial
}
