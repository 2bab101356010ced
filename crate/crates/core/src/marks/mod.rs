//! Conditional mark model: feature construction, tree-ensemble training and prediction.

pub mod competition;
pub mod raster;
pub mod trees;
pub mod tuning;

pub use competition::{competition_indices, competition_indices_raw, CompetitionIndices, EdgeCorrection, COMPETITION_FEATURES};
pub use raster::{extract_covariates, parse_ascii_grid, read_ascii_grid, read_raster_dir, scale_rasters, RasterGrid};
pub use trees::{GbtParams, RfParams, Tree};
pub use tuning::Metric;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{MarkedPattern, Window};
use crate::rng;
use crate::time_mapping::order_by_time;
use trees::{fit_gbt, fit_rf, Dataset};
use tuning::{kfold_assignment, latin_hypercube, scale_int, scale_real};

pub const MARK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    GradientBoostedTrees,
    RandomForest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperparameters {
    Gbt(GbtParams),
    Rf(RfParams),
}

impl Hyperparameters {
    /// Centre of the tuning box.
    pub fn default_for(engine: Engine, n_features: usize) -> Self {
        match engine {
            Engine::GradientBoostedTrees => Hyperparameters::Gbt(GbtParams {
                n_trees: 275,
                max_depth: 4,
                learning_rate: 0.155,
                min_leaf: 11,
                subsample: 0.75,
            }),
            Engine::RandomForest => Hyperparameters::Rf(RfParams {
                n_trees: 300,
                mtry: n_features.div_ceil(2).max(1),
                min_leaf: 5,
            }),
        }
    }

    /// Maps a point of the unit cube onto the tuning box of `engine`.
    pub fn from_unit(engine: Engine, u: &[f64], n_features: usize) -> Self {
        match engine {
            Engine::GradientBoostedTrees => Hyperparameters::Gbt(GbtParams {
                n_trees: scale_int(u[0], 50, 500),
                max_depth: scale_int(u[1], 1, 8),
                learning_rate: scale_real(u[2], 0.01, 0.3),
                min_leaf: scale_int(u[3], 2, 20),
                subsample: scale_real(u[4], 0.5, 1.0),
            }),
            Engine::RandomForest => Hyperparameters::Rf(RfParams {
                n_trees: scale_int(u[0], 100, 500),
                mtry: scale_int(u[1], 1, n_features.max(1)),
                min_leaf: scale_int(u[2], 1, 10),
            }),
        }
    }

    fn box_dim(engine: Engine) -> usize {
        match engine {
            Engine::GradientBoostedTrees => 5,
            Engine::RandomForest => 3,
        }
    }
}

/// Feature matrix and response for mark training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkTrainingTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub response: Vec<f64>,
}

impl MarkTrainingTable {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::invalid("training table is empty"));
        }
        if self.rows.len() != self.response.len() {
            return Err(Error::invalid("rows and responses differ in length"));
        }
        let p = self.feature_names.len();
        if let Some(i) = self.rows.iter().position(|r| r.len() != p) {
            return Err(Error::invalid(format!("row {i} does not have {p} features")));
        }
        if self.rows.iter().flatten().chain(&self.response).any(|v| !v.is_finite()) {
            return Err(Error::invalid("training table contains non-finite values"));
        }
        Ok(())
    }
}

/// How the features of a point are built from its pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub delta: f64,
    pub radius: f64,
    #[serde(default)]
    pub edge_correction: EdgeCorrection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkMetadata {
    pub features: FeatureConfig,
    pub raster_names: Vec<String>,
    /// `secondary` or `size`.
    pub response: String,
    pub n_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub hyperparameters: Hyperparameters,
    pub cv_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedMarkModel {
    pub schema_version: u32,
    pub engine: Engine,
    pub hyperparameters: Hyperparameters,
    pub base: f64,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    pub selection_metric: Metric,
    pub tuning: Vec<TuningRecord>,
    pub constant_response: bool,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<MarkMetadata>,
}

impl TrainedMarkModel {
    fn raw_predict(&self, x: &[f64]) -> f64 {
        if self.constant_response || self.trees.is_empty() {
            return self.base;
        }
        match self.hyperparameters {
            Hyperparameters::Gbt(p) => self.base + p.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>(),
            Hyperparameters::Rf(_) => self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub engine: Engine,
    pub cv_folds: usize,
    pub tuning_grid_size: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            engine: Engine::GradientBoostedTrees,
            cv_folds: 5,
            tuning_grid_size: 8,
            metric: Metric::Rmse,
            seed: 1,
        }
    }
}

fn fit_engine(hp: &Hyperparameters, rows: &[Vec<f64>], y: &[f64], seed: u64) -> (f64, Vec<Tree>) {
    let data = Dataset::new(rows);
    let mut r = rng::stream(seed, 0, 0);
    match hp {
        Hyperparameters::Gbt(p) => fit_gbt(&data, y, p, &mut r),
        Hyperparameters::Rf(p) => (0.0, fit_rf(&data, y, p, &mut r)),
    }
}

fn assemble(table: &MarkTrainingTable, config: &TrainConfig, hp: Hyperparameters, base: f64, trees: Vec<Tree>) -> TrainedMarkModel {
    TrainedMarkModel {
        schema_version: MARK_SCHEMA_VERSION,
        engine: config.engine,
        hyperparameters: hp,
        base,
        trees,
        feature_names: table.feature_names.clone(),
        selection_metric: config.metric,
        tuning: Vec::new(),
        constant_response: false,
        warnings: Vec::new(),
        metadata: None,
    }
}

const STAGE_CV: u64 = 1;
const STAGE_FOLDS: u64 = 2;
const STAGE_DESIGN: u64 = 3;
const STAGE_FINAL: u64 = 4;

/// Tunes by Latin-hypercube search with k-fold cross-validation, then refits on all rows.
///
/// With `cv_folds <= 1` tuning is skipped and the centre of the tuning box is used.
pub fn train_mark_model(table: &MarkTrainingTable, config: &TrainConfig) -> Result<TrainedMarkModel> {
    table.validate()?;
    let n = table.rows.len();
    let p = table.feature_names.len();
    let (lo, hi) = table
        .response
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let c = table.response[0];
        let hp = Hyperparameters::default_for(config.engine, p);
        let mut model = assemble(table, config, hp, c, Vec::new());
        model.constant_response = true;
        model.warnings.push(format!("response is constant ({c}); the model predicts it everywhere"));
        return Ok(model);
    }

    if config.cv_folds <= 1 {
        let hp = Hyperparameters::default_for(config.engine, p);
        let (base, trees) = fit_engine(&hp, &table.rows, &table.response, rng::derive_seed(config.seed, STAGE_FINAL, 0));
        return Ok(assemble(table, config, hp, base, trees));
    }
    let k = config.cv_folds;
    if n < k || n < 10 {
        return Err(Error::invalid(format!("{n} rows are too few for {k}-fold cross-validation (need at least 10)")));
    }
    let grid = config.tuning_grid_size.max(1);
    let design = latin_hypercube(grid, Hyperparameters::box_dim(config.engine), &mut rng::stream(config.seed, STAGE_DESIGN, 0));
    let candidates: Vec<Hyperparameters> = design.iter().map(|u| Hyperparameters::from_unit(config.engine, u, p)).collect();
    let folds = kfold_assignment(n, k, &mut rng::stream(config.seed, STAGE_FOLDS, 0));

    let scores: Vec<f64> = candidates
        .par_iter()
        .enumerate()
        .map(|(c, hp)| {
            let per_fold: Vec<f64> = (0..k)
                .map(|fold| {
                    let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] != fold);
                    let rows: Vec<Vec<f64>> = train.iter().map(|&i| table.rows[i].clone()).collect();
                    let y: Vec<f64> = train.iter().map(|&i| table.response[i]).collect();
                    let seed = rng::derive_seed(config.seed, STAGE_CV, (c * k + fold) as u64);
                    let (base, trees) = fit_engine(hp, &rows, &y, seed);
                    let model = assemble(table, config, *hp, base, trees);
                    let truth: Vec<f64> = test.iter().map(|&i| table.response[i]).collect();
                    let pred: Vec<f64> = test.iter().map(|&i| model.raw_predict(&table.rows[i]).max(0.0)).collect();
                    config.metric.evaluate(&truth, &pred)
                })
                .collect();
            per_fold.iter().sum::<f64>() / k as f64
        })
        .collect();

    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if config.metric.better(s, scores[best]) || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    let hp = candidates[best];
    let (base, trees) = fit_engine(&hp, &table.rows, &table.response, rng::derive_seed(config.seed, STAGE_FINAL, 0));
    let mut model = assemble(table, config, hp, base, trees);
    model.tuning = candidates
        .into_iter()
        .zip(scores)
        .map(|(hyperparameters, cv_metric)| TuningRecord { hyperparameters, cv_metric })
        .collect();
    Ok(model)
}

/// Non-negative predictions for rows whose columns are named `names`.
pub fn predict_marks(model: &TrainedMarkModel, names: &[String], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let missing: Vec<String> = model.feature_names.iter().filter(|f| !names.contains(f)).cloned().collect();
    let extra: Vec<String> = names.iter().filter(|f| !model.feature_names.contains(f)).cloned().collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::FeatureMismatch { missing, extra });
    }
    let order: Vec<usize> = model
        .feature_names
        .iter()
        .map(|f| names.iter().position(|n| n == f).expect("checked above"))
        .collect();
    rows.iter()
        .map(|r| {
            if r.len() != names.len() {
                return Err(Error::invalid("feature row has the wrong length"));
            }
            let x: Vec<f64> = order.iter().map(|&j| r[j]).collect();
            Ok(model.raw_predict(&x).max(0.0))
        })
        .collect()
}

/// Feature names in model order: time, location, rasters, competition indices.
pub fn feature_names(raster_names: &[String]) -> Vec<String> {
    ["t", "x", "y"]
        .iter()
        .map(|s| s.to_string())
        .chain(raster_names.iter().cloned())
        .chain(COMPETITION_FEATURES.iter().map(|s| s.to_string()))
        .collect()
}

/// Feature rows for time-ordered events; returns the kept event indices and their rows.
pub fn feature_rows(
    times: &[f64],
    locs: &[(f64, f64)],
    window: &Window,
    rasters: &[RasterGrid],
    features: &FeatureConfig,
    t_max: f64,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let ci = competition_indices_raw(locs, times, window, features.radius, features.edge_correction, t_max)?;
    let kept_locs: Vec<(f64, f64)> = ci.kept.iter().map(|&i| locs[i]).collect();
    let covariates = extract_covariates(rasters, &kept_locs)?;
    let rows = ci
        .kept
        .iter()
        .zip(covariates)
        .zip(&ci.rows)
        .map(|((&i, cov), comp)| {
            let mut row = vec![times[i], locs[i].0, locs[i].1];
            row.extend(cov);
            row.extend_from_slice(comp);
            row
        })
        .collect();
    Ok((ci.kept, rows))
}

/// Training table for a marked pattern; the response is the secondary mark
/// when every point has one, else the size.
pub fn build_training_table(pattern: &MarkedPattern, rasters: &[RasterGrid], features: &FeatureConfig) -> Result<MarkTrainingTable> {
    let tp = order_by_time(pattern, features.delta)?;
    let use_secondary = tp.events.iter().all(|e| e.secondary.is_some());
    let names: Vec<String> = rasters.iter().map(|r| r.name.clone()).collect();
    let (kept, rows) = feature_rows(&tp.times(), &tp.locations(), &tp.window, rasters, features, 1.0)?;
    let response = kept
        .iter()
        .map(|&i| {
            let e = &tp.events[i];
            if use_secondary {
                e.secondary.unwrap_or(e.size)
            } else {
                e.size
            }
        })
        .collect();
    Ok(MarkTrainingTable {
        feature_names: feature_names(&names),
        rows,
        response,
    })
}

/// Builds the training table, trains the model and records how the features were made.
pub fn train_marks_for_pattern(
    pattern: &MarkedPattern,
    rasters: &[RasterGrid],
    features: &FeatureConfig,
    config: &TrainConfig,
) -> Result<TrainedMarkModel> {
    let table = build_training_table(pattern, rasters, features)?;
    let mut model = train_mark_model(&table, config)?;
    let secondary = pattern.points.iter().all(|p| p.secondary.is_some());
    model.metadata = Some(MarkMetadata {
        features: features.clone(),
        raster_names: rasters.iter().map(|r| r.name.clone()).collect(),
        response: if secondary { "secondary" } else { "size" }.to_string(),
        n_rows: table.rows.len(),
    });
    Ok(model)
}
