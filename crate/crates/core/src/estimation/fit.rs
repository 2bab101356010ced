use std::time::Instant;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    default_initialization, minimize_global, minimize_local, rescore_candidates, Bounds, BudgetSchedule, Candidate,
    Initialization, RescoreControl, StartsConfig, Status,
};
use crate::error::{Error, Result};
use crate::likelihood::{GridLevel, LikelihoodContext, QuadratureSchedule, ScParameters};
use crate::pattern::{MarkedPattern, Window};
use crate::rng;
use crate::time_mapping::{order_by_time, validate_delta, TemporalPattern};

pub const FIT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Local,
    GlobalLocal,
    MultiresGlobalLocal,
}

/// One mapping exponent, or a list of candidates to choose from by objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Single(f64),
    List(Vec<f64>),
}

impl DeltaSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            DeltaSpec::Single(d) => vec![*d],
            DeltaSpec::List(v) => v.clone(),
        };
        if v.is_empty() {
            return Err(Error::invalid("delta list is empty"));
        }
        v.iter().try_for_each(|&d| validate_delta(d))?;
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub schedule: QuadratureSchedule,
    #[serde(default)]
    pub budgets: BudgetSchedule,
    pub strategy: Strategy,
    #[serde(default)]
    pub starts: StartsConfig,
    pub delta: DeltaSpec,
    #[serde(default)]
    pub rescore: RescoreControl,
    #[serde(default)]
    pub refine_best_delta: bool,
    /// Replaces the data-driven starting point; bounds stay data-driven.
    #[serde(default)]
    pub init: Option<ScParameters>,
}

impl FitConfig {
    pub fn new(schedule: QuadratureSchedule, strategy: Strategy, delta: DeltaSpec) -> Self {
        FitConfig {
            schedule,
            budgets: BudgetSchedule::default(),
            strategy,
            starts: StartsConfig::default(),
            delta,
            rescore: RescoreControl::default(),
            refine_best_delta: true,
            init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.budgets.validate()?;
        self.starts.validate()?;
        self.delta.values().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub schema_version: u32,
    pub parameters: ScParameters,
    pub objective: f64,
    /// Grid on which `objective` was evaluated.
    pub objective_level: GridLevel,
    pub status: Status,
    pub selected_delta: f64,
    /// First-stage objective for every candidate exponent, in input order.
    pub delta_objectives: Vec<(f64, f64)>,
    pub initial: ScParameters,
    pub bounds: Bounds,
    pub strategy: Strategy,
    pub schedule: QuadratureSchedule,
    pub budgets: BudgetSchedule,
    pub seed: u64,
    pub elapsed: f64,
    pub window: Window,
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<MarkedPattern>,
}

/// Candidates alive after a stage, best first, with the status of the run behind each.
struct Stage {
    candidates: Vec<(Candidate, Status)>,
    level: GridLevel,
    diagnostics: Vec<String>,
}

impl Stage {
    fn best(&self) -> &(Candidate, Status) {
        &self.candidates[0]
    }
}

fn sort_candidates(c: &mut [(Candidate, Status)]) {
    c.sort_by(|a, b| a.0.value.total_cmp(&b.0.value));
}

struct Problem<'a> {
    pattern: TemporalPattern,
    init: ScParameters,
    bounds: Bounds,
    config: &'a FitConfig,
    stream: u64,
}

const KIND_JITTER: u64 = 1;
const KIND_GLOBAL: u64 = 2;
const KIND_LOCAL_JITTER: u64 = 3;

impl Problem<'_> {
    fn objective(&self, level: GridLevel) -> Result<impl Fn(&[f64]) -> f64 + Sync> {
        let ctx = LikelihoodContext::new(&self.pattern, level)?;
        Ok(move |x: &[f64]| {
            ScParameters::from_slice(x)
                .and_then(|p| ctx.evaluate(&p))
                .unwrap_or(f64::INFINITY)
        })
    }

    fn seed(&self, kind: u64) -> u64 {
        rng::derive_seed(self.config.starts.seed, self.stream, kind)
    }

    /// Start `index` jittered around `x`; index 0 is `x` itself.
    fn jittered(&self, x: &[f64], kind: u64, index: usize) -> Vec<f64> {
        if index == 0 || self.config.starts.jitter_sd == 0.0 {
            return x.to_vec();
        }
        let mut r = rng::stream(self.seed(kind), 0, index as u64);
        let mut out: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let sd = self.config.starts.jitter_sd * self.bounds.width(i) / 10.0;
                if sd > 0.0 {
                    v + Normal::new(0.0, sd).expect("positive sd").sample(&mut r)
                } else {
                    v
                }
            })
            .collect();
        self.bounds.clamp(&mut out);
        out
    }

    fn local_runs(&self, starts: &[Vec<f64>], level: GridLevel, first: bool) -> Result<Stage> {
        let f = self.objective(level)?;
        let budget = if first { self.config.budgets.local_first } else { self.config.budgets.local_refine };
        let runs: Vec<Result<(Candidate, Status)>> = starts
            .par_iter()
            .map(|x| {
                minimize_local(&f, x, &self.bounds, &budget).map(|r| (Candidate { x: r.x, value: r.value }, r.status))
            })
            .collect();
        collect_stage(runs, level)
    }

    fn first_stage(&self) -> Result<Stage> {
        let cfg = self.config;
        let level = cfg.schedule.levels[0];
        let x0 = self.init.to_array().to_vec();
        match cfg.strategy {
            Strategy::Local => {
                let starts: Vec<Vec<f64>> =
                    (0..cfg.starts.local_starts).map(|s| self.jittered(&x0, KIND_JITTER, s)).collect();
                self.local_runs(&starts, level, true)
            }
            Strategy::GlobalLocal | Strategy::MultiresGlobalLocal => {
                let f = self.objective(level)?;
                let globals: Vec<Result<(Candidate, Status)>> = (0..cfg.starts.global_restarts)
                    .into_par_iter()
                    .map(|r| {
                        let start = self.jittered(&x0, KIND_JITTER, r);
                        let seed = rng::derive_seed(self.seed(KIND_GLOBAL), 0, r as u64);
                        minimize_global(&f, &self.bounds, &cfg.budgets.global, seed, Some(&start))
                            .map(|g| (Candidate { x: g.x, value: g.value }, g.status))
                    })
                    .collect();
                let global = collect_stage(globals, level)?;
                let starts: Vec<Vec<f64>> = (0..cfg.starts.local_starts)
                    .map(|s| match global.candidates.get(s) {
                        Some((c, _)) => c.x.clone(),
                        None => self.jittered(&global.best().0.x, KIND_LOCAL_JITTER, s),
                    })
                    .collect();
                let mut local = self.local_runs(&starts, level, true)?;
                local.diagnostics.extend(global.diagnostics);
                if cfg.strategy == Strategy::MultiresGlobalLocal {
                    local.candidates.extend(global.candidates);
                    sort_candidates(&mut local.candidates);
                }
                Ok(local)
            }
        }
    }

    fn refine(&self, mut stage: Stage) -> Result<Stage> {
        let cfg = self.config;
        if cfg.strategy == Strategy::GlobalLocal {
            return Ok(stage);
        }
        for &level in &cfg.schedule.levels[1..] {
            let k = cfg.starts.local_starts;
            let starts: Vec<Vec<f64>> = match cfg.strategy {
                Strategy::MultiresGlobalLocal => {
                    let f = self.objective(level)?;
                    let pool: Vec<Candidate> = stage.candidates.iter().map(|(c, _)| c.clone()).collect();
                    rescore_candidates(&pool, &f, &self.bounds, &cfg.rescore)
                        .into_iter()
                        .take(k)
                        .map(|c| c.x)
                        .collect()
                }
                _ => stage.candidates.iter().take(k).map(|(c, _)| c.x.clone()).collect(),
            };
            let diagnostics = std::mem::take(&mut stage.diagnostics);
            stage = self.local_runs(&starts, level, false)?;
            stage.diagnostics.splice(0..0, diagnostics);
        }
        Ok(stage)
    }
}

fn collect_stage(runs: Vec<Result<(Candidate, Status)>>, level: GridLevel) -> Result<Stage> {
    let mut candidates = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, r) in runs.into_iter().enumerate() {
        match r {
            Ok(c) if c.0.value.is_finite() => candidates.push(c),
            Ok(_) => diagnostics.push(format!("start {i}: non-finite objective")),
            Err(e) => diagnostics.push(format!("start {i}: {e}")),
        }
    }
    if candidates.is_empty() {
        return Err(Error::EstimationFailed { diagnostics });
    }
    sort_candidates(&mut candidates);
    Ok(Stage { candidates, level, diagnostics })
}

/// Notes where the data reach past the schedule's upper bounds. The
/// integral itself runs over the observed time span and the pattern window.
fn bounds_diagnostics(problems: &[Problem], schedule: &QuadratureSchedule) -> Vec<String> {
    let [t_ub, x_ub, y_ub] = schedule.upper_bounds;
    let mut out = Vec::new();
    if let Some(p) = problems.first() {
        let w = p.pattern.window;
        if w.x_max > x_ub || w.y_max > y_ub {
            out.push(format!("window extends past grid upper bounds ({x_ub}, {y_ub})"));
        }
    }
    for p in problems {
        let last = p.pattern.times().last().copied().unwrap_or(0.0);
        if last > t_ub {
            out.push(format!("last event time {last} exceeds grid time bound {t_ub}"));
            break;
        }
    }
    out
}

/// Fits the self-correcting model to a marked pattern.
///
/// Every parallel task draws from a stream keyed by the seed, the exponent
/// index and the start index, so results do not depend on the worker count.
pub fn fit_process(pattern: &MarkedPattern, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let clock = Instant::now();
    let deltas = config.delta.values()?;
    let search = deltas.len() > 1;

    let problems: Vec<Problem> = deltas
        .iter()
        .enumerate()
        .map(|(k, &delta)| {
            let tp = order_by_time(pattern, delta)?;
            let Initialization { init, bounds } = default_initialization(&tp, &config.schedule)?;
            let mut start = config.init.unwrap_or(init).to_array();
            bounds.clamp(&mut start);
            Ok(Problem {
                pattern: tp,
                init: ScParameters::from_array(start),
                bounds,
                config,
                stream: k as u64,
            })
        })
        .collect::<Result<_>>()?;

    let stages: Vec<Result<Stage>> = problems
        .par_iter()
        .map(|p| {
            let stage = p.first_stage()?;
            if search {
                Ok(stage)
            } else {
                p.refine(stage)
            }
        })
        .collect();

    let mut diagnostics = bounds_diagnostics(&problems, &config.schedule);
    let mut delta_objectives = Vec::new();
    let mut best: Option<(usize, Stage)> = None;
    for (k, s) in stages.into_iter().enumerate() {
        match s {
            Ok(stage) => {
                delta_objectives.push((deltas[k], stage.best().0.value));
                let better = best.as_ref().is_none_or(|(_, b)| stage.best().0.value < b.best().0.value);
                if better {
                    best = Some((k, stage));
                }
            }
            Err(e) => {
                delta_objectives.push((deltas[k], f64::NAN));
                diagnostics.push(format!("delta {}: {e}", deltas[k]));
            }
        }
    }
    let (k, mut stage) = best.ok_or(Error::EstimationFailed { diagnostics: diagnostics.clone() })?;
    let problem = &problems[k];
    if search && config.refine_best_delta {
        stage = problem.refine(stage)?;
    }
    diagnostics.append(&mut stage.diagnostics);

    let (winner, status) = stage.best().clone();
    Ok(FitResult {
        schema_version: FIT_SCHEMA_VERSION,
        parameters: ScParameters::from_slice(&winner.x)?,
        objective: winner.value,
        objective_level: stage.level,
        status,
        selected_delta: deltas[k],
        delta_objectives,
        initial: problem.init,
        bounds: problem.bounds.clone(),
        strategy: config.strategy,
        schedule: config.schedule.clone(),
        budgets: config.budgets,
        seed: config.starts.seed,
        elapsed: clock.elapsed().as_secs_f64(),
        window: pattern.window,
        diagnostics,
        data: Some(pattern.clone()),
    })
}
