//! Goodness-of-fit check of a fitted model by simulation envelopes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{combined_envelope, rank_envelope, CombinedTest, CurveSet, EnvelopeTest};
use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::marks::EdgeCorrection;
use crate::pattern::{MarkedPattern, MarkedPoint};
use crate::rng;
use crate::simulation::{fit_time_mapping, simulate_mpp, MarkMode, MarkSource, SimConfig, SimRealization};
use crate::summaries::{summaries, EstimatorOptions, SummaryCurve, SummaryKind};

pub const CHECK_SCHEMA_VERSION: u32 = 1;
/// Realizations advised for a final check at the 5% level.
pub const RECOMMENDED_N_SIM: usize = 2499;

const STAGE_CHECK: u64 = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckOptions {
    pub n_sim: usize,
    pub alpha: f64,
    pub estimator: EstimatorOptions,
    pub statistics: Vec<SummaryKind>,
    pub thinning: bool,
    pub mark_mode: MarkMode,
    pub radius: Option<f64>,
    pub edge_correction: Option<EdgeCorrection>,
    /// Draws allowed per realization before the check gives up.
    pub max_attempts: usize,
    pub seed: u64,
    pub save_sims: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            n_sim: 2500,
            alpha: 0.05,
            estimator: EstimatorOptions::default(),
            statistics: SummaryKind::ALL.to_vec(),
            thinning: true,
            mark_mode: MarkMode::MarkModel,
            radius: None,
            edge_correction: None,
            max_attempts: 10,
            seed: 1,
            save_sims: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub schema_version: u32,
    pub statistics: Vec<EnvelopeTest>,
    pub combined: CombinedTest,
    /// Tie-breaking measure behind the single p-values.
    pub ordering: String,
    pub n_sim: usize,
    pub redraws: usize,
    pub warnings: Vec<String>,
    pub options: CheckOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Vec<SimulatedCurves>>,
}

impl CheckResult {
    pub fn combined_p(&self) -> f64 {
        self.combined.p.p_erl
    }
}

/// Saved curves of one statistic, observed first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedCurves {
    pub kind: SummaryKind,
    pub observed: SummaryCurve,
    pub simulated: Vec<SummaryCurve>,
}

/// Pattern whose primary marks are the realization's marks.
pub fn realization_pattern(real: &SimRealization) -> MarkedPattern {
    MarkedPattern {
        window: real.window,
        points: real.events.iter().map(|e| MarkedPoint::new(e.x, e.y, e.mark)).collect(),
    }
}

fn usable(curves: &[SummaryCurve]) -> bool {
    curves
        .iter()
        .all(|c| c.value.iter().all(|v| !v.is_infinite()) && c.value.iter().any(|v| v.is_finite()))
}

fn observed_pattern(fit: &FitResult, marks: &MarkSource<'_>) -> Result<MarkedPattern> {
    let data = fit
        .data
        .as_ref()
        .ok_or_else(|| Error::invalid("fit result does not carry its data pattern"))?;
    let secondary = matches!(marks, MarkSource::Model { model, .. }
        if model.metadata.as_ref().is_some_and(|m| m.response == "secondary"));
    Ok(MarkedPattern {
        window: data.window,
        points: data
            .points
            .iter()
            .map(|p| MarkedPoint::new(p.x, p.y, if secondary { p.secondary.unwrap_or(p.size) } else { p.size }))
            .collect(),
    })
}

/// One realization's summaries, redrawn until usable or out of attempts.
fn draw(
    fit: &FitResult,
    marks: MarkSource<'_>,
    base: &SimConfig,
    options: &CheckOptions,
    index: usize,
) -> Result<(Vec<SummaryCurve>, usize)> {
    for attempt in 0..options.max_attempts.max(1) {
        let config = SimConfig {
            seed: rng::derive_seed(rng::derive_seed(options.seed, STAGE_CHECK, index as u64), 0, attempt as u64),
            ..base.clone()
        };
        let real = simulate_mpp(fit, marks, &config)?;
        if real.events.len() < 2 {
            continue;
        }
        let curves = summaries(&realization_pattern(&real), &options.statistics, &options.estimator)?;
        if usable(&curves) {
            return Ok((curves, attempt));
        }
    }
    Err(Error::SimulationDegeneracy(format!(
        "realization {index} gave no usable summaries in {} attempts",
        options.max_attempts.max(1)
    )))
}

/// Simulates `n_sim` realizations of the fit and runs per-statistic and combined envelope tests.
pub fn check_model_fit(fit: &FitResult, marks: MarkSource<'_>, options: &CheckOptions) -> Result<CheckResult> {
    if options.n_sim == 0 {
        return Err(Error::invalid("n_sim must be positive"));
    }
    if options.statistics.is_empty() {
        return Err(Error::invalid("no statistics requested"));
    }
    let mode_matches = matches!(
        (options.mark_mode, &marks),
        (MarkMode::MarkModel, MarkSource::Model { .. }) | (MarkMode::TimeToSize, MarkSource::Mapping(_))
    );
    if !mode_matches {
        return Err(Error::invalid("mark source does not match the configured mark mode"));
    }
    let observed = observed_pattern(fit, &marks)?;
    let observed_curves = summaries(&observed, &options.statistics, &options.estimator)?;
    let base = SimConfig {
        t_range: (0.0, 1.0),
        anchor: None,
        thinning: options.thinning,
        mark_mode: options.mark_mode,
        radius: options.radius,
        edge_correction: options.edge_correction,
        seed: options.seed,
    };
    let draws: Vec<(Vec<SummaryCurve>, usize)> = (0..options.n_sim)
        .into_par_iter()
        .map(|i| draw(fit, marks, &base, options, i))
        .collect::<Result<_>>()?;
    let redraws = draws.iter().map(|d| d.1).sum();

    let mut sets = Vec::new();
    let mut saved = Vec::new();
    for (s, obs) in observed_curves.iter().enumerate() {
        let sims: Vec<SummaryCurve> = draws.iter().map(|d| d.0[s].clone()).collect();
        sets.push(CurveSet::from_curves(obs, &sims)?);
        if options.save_sims {
            saved.push(SimulatedCurves { kind: obs.kind, observed: obs.clone(), simulated: sims });
        }
    }
    let statistics = sets.iter().map(|s| rank_envelope(s, options.alpha)).collect::<Result<Vec<_>>>()?;
    let combined = combined_envelope(&sets, options.alpha)?;
    let mut warnings = Vec::new();
    if options.n_sim < RECOMMENDED_N_SIM && options.alpha <= 0.05 {
        warnings.push(format!(
            "{} realizations; at least {RECOMMENDED_N_SIM} are advised for a final check",
            options.n_sim
        ));
    }
    for t in &statistics {
        if !t.dropped.is_empty() {
            warnings.push(format!("{}: {} distances dropped where some curve is undefined", t.kind.label(), t.dropped.len()));
        }
    }
    Ok(CheckResult {
        schema_version: CHECK_SCHEMA_VERSION,
        statistics,
        combined,
        ordering: "extreme_rank_length".into(),
        n_sim: options.n_sim,
        redraws,
        warnings,
        options: options.clone(),
        curves: options.save_sims.then_some(saved),
    })
}

/// Check with marks mapped back from simulated times over the fit's size range.
pub fn check_with_time_marks(fit: &FitResult, options: &CheckOptions) -> Result<CheckResult> {
    let mapping = fit_time_mapping(fit)?;
    let options = CheckOptions { mark_mode: MarkMode::TimeToSize, ..options.clone() };
    check_model_fit(fit, MarkSource::Mapping(mapping), &options)
}
