//! Nelder-Mead simplex descent with projection onto the box.

use super::{guarded, within_ftol, Bounds, Budget, OptimResult, Status};
use crate::error::{Error, Result};

const STEP: f64 = 0.05;

/// Minimises `f` from `start`, restarting from the incumbent while restarts still help.
pub fn minimize_local<F>(f: F, start: &[f64], bounds: &Bounds, budget: &Budget) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    bounds.validate()?;
    budget.validate()?;
    if start.len() != bounds.dim() {
        return Err(Error::invalid("start point has the wrong dimension"));
    }
    if !bounds.contains(start) {
        return Err(Error::invalid("start point lies outside the bounds"));
    }
    let f0 = guarded(&f, start);
    if f0.is_infinite() {
        return Err(Error::InvalidStart);
    }
    let mut best = OptimResult {
        x: start.to_vec(),
        value: f0,
        evals: 1,
        status: Status::MaxevalReached,
    };
    let mut step = STEP;
    loop {
        let run = nelder_mead(&f, &best.x, best.value, bounds, budget, best.evals, step);
        let improved = run.value < best.value;
        best = OptimResult {
            x: if improved { run.x } else { best.x },
            value: run.value.min(best.value),
            evals: run.evals,
            status: run.status,
        };
        if !improved || best.evals >= budget.maxeval || run.status == Status::XtolReached {
            break;
        }
        step = (step * 0.5).max(STEP / 16.0);
    }
    if best.evals >= budget.maxeval {
        best.status = Status::MaxevalReached;
    }
    Ok(best)
}

fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    f0: f64,
    bounds: &Bounds,
    budget: &Budget,
    mut evals: usize,
    step: f64,
) -> OptimResult {
    let d = x0.len();
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        guarded(f, x)
    };

    let mut simplex = vec![x0.to_vec()];
    let mut values = vec![f0];
    for i in 0..d {
        let mut v = x0.to_vec();
        let h = step * bounds.width(i);
        v[i] = if v[i] + h <= bounds.upper[i] { v[i] + h } else { v[i] - h };
        bounds.clamp(&mut v);
        if evals >= budget.maxeval {
            break;
        }
        values.push(eval(&v, &mut evals));
        simplex.push(v);
    }
    if simplex.len() < d + 1 {
        return OptimResult { x: x0.to_vec(), value: f0, evals, status: Status::MaxevalReached };
    }

    let mut stall = 0;
    let mut record = f0;
    let status = loop {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if values[0] < record {
            record = values[0];
            stall = 0;
        } else {
            stall += 1;
        }
        if evals >= budget.maxeval {
            break Status::MaxevalReached;
        }
        let collapsed = (0..d).all(|i| {
            simplex.iter().all(|v| (v[i] - simplex[0][i]).abs() <= budget.xtol_rel * bounds.width(i))
        });
        if collapsed {
            break Status::XtolReached;
        }
        if within_ftol(values[0], values[d], budget.ftol_rel) || stall > d + 1 {
            break Status::FtolReached;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|i| simplex[..d].iter().map(|v| v[i]).sum::<f64>() / d as f64)
            .collect();
        let toward = |coef: f64| -> Vec<f64> {
            let mut x: Vec<f64> = (0..d).map(|i| centroid[i] + coef * (simplex[d][i] - centroid[i])).collect();
            bounds.clamp(&mut x);
            x
        };

        let xr = toward(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = toward(-2.0);
            let fe = if evals < budget.maxeval { eval(&xe, &mut evals) } else { f64::INFINITY };
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, limit) = if fr < values[d] { (toward(-0.5), fr) } else { (toward(0.5), values[d]) };
        let fc = if evals < budget.maxeval { eval(&xc, &mut evals) } else { f64::INFINITY };
        if fc < limit || (fc == limit && fr < values[d]) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        if fr < values[d] {
            simplex[d] = xr;
            values[d] = fr;
        }
        // shrink toward the best vertex
        for k in 1..=d {
            if evals >= budget.maxeval {
                break;
            }
            let mut v: Vec<f64> = (0..d).map(|i| simplex[0][i] + 0.5 * (simplex[k][i] - simplex[0][i])).collect();
            bounds.clamp(&mut v);
            values[k] = eval(&v, &mut evals);
            simplex[k] = v;
        }
    };

    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    OptimResult {
        x: simplex[best].clone(),
        value: values[best],
        evals,
        status,
    }
}
