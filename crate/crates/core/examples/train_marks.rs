//! Trains a boosted-tree mark model on a covariate raster and the competition indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scmpp::marks::{predict_marks, train_marks_for_pattern, EdgeCorrection, FeatureConfig, RasterGrid};
use scmpp::marks::tuning::Metric;
use scmpp::pattern::{MarkedPattern, MarkedPoint, Window};

fn main() -> scmpp::Result<()> {
    let window = Window::new(0.0, 20.0, 0.0, 20.0)?;
    let values = (0..20 * 20).map(|k| ((k % 20) as f64 / 4.0).sin() + (k / 20) as f64 / 10.0).collect();
    let soil = RasterGrid::new("soil", 20, 20, (0.0, 0.0), 1.0, values)?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let points = (0..200)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
            let s = soil.value_at(x, y).unwrap_or(0.0);
            MarkedPoint::new(x, y, (5.0 + 3.0 * s + rng.random_range(-0.5..0.5)).max(0.1))
        })
        .collect();
    let pattern = MarkedPattern::new(window, points)?;

    let features = FeatureConfig { delta: 1.0, radius: 2.0, edge_correction: EdgeCorrection::Toroidal };
    let config = scmpp::marks::TrainConfig { cv_folds: 5, tuning_grid_size: 6, metric: Metric::Rsq, ..Default::default() };
    let model = train_marks_for_pattern(&pattern, std::slice::from_ref(&soil), &features, &config)?;
    println!("selected {:?}", model.hyperparameters);
    for rec in &model.tuning {
        println!("  cv r^2 {:.3}", rec.cv_metric);
    }

    let table = scmpp::marks::build_training_table(&pattern, &[soil], &features)?;
    let pred = predict_marks(&model, &table.feature_names, &table.rows)?;
    let r2 = Metric::Rsq.evaluate(&table.response, &pred);
    println!("in-sample r^2 {r2:.3}");
    Ok(())
}
