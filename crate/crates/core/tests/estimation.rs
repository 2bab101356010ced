mod common;

use common::{quick_config, synthetic_pattern};
use scmpp::estimation::{fit_process, DeltaSpec, FitResult, Strategy};
use scmpp::likelihood::neg_log_likelihood;
use scmpp::time_mapping::order_by_time;

#[test]
fn global_local_fit_improves_on_its_start() {
    let pattern = synthetic_pattern(3);
    let fit = fit_process(&pattern, &quick_config(Strategy::GlobalLocal, DeltaSpec::Single(1.0), 300)).unwrap();
    let tp = order_by_time(&pattern, 1.0).unwrap();
    let start = neg_log_likelihood(&fit.initial, &tp, fit.objective_level).unwrap();
    let at_fit = neg_log_likelihood(&fit.parameters, &tp, fit.objective_level).unwrap();
    assert!(fit.objective <= start, "objective {} above start {start}", fit.objective);
    assert!((at_fit - fit.objective).abs() <= 1e-9 * at_fit.abs());
    assert!(fit.bounds.contains(&fit.parameters.to_array()));
}

#[test]
fn fit_is_identical_across_thread_pools() {
    let pattern = synthetic_pattern(4);
    let mut config = quick_config(Strategy::GlobalLocal, DeltaSpec::List(vec![0.8, 1.0]), 150);
    config.starts.local_starts = 3;
    config.starts.global_restarts = 2;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| fit_process(&pattern, &config).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.parameters, b.parameters);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.delta_objectives, b.delta_objectives);
}

#[test]
fn delta_search_reports_every_candidate_and_keeps_the_best() {
    let pattern = synthetic_pattern(5);
    let deltas = vec![0.5, 1.0, 2.0];
    let fit = fit_process(&pattern, &quick_config(Strategy::Local, DeltaSpec::List(deltas.clone()), 150)).unwrap();
    let listed: Vec<f64> = fit.delta_objectives.iter().map(|d| d.0).collect();
    assert_eq!(listed, deltas);
    let best = fit.delta_objectives.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(fit.selected_delta, best.0);
}

#[test]
fn fit_result_survives_json() {
    let fit = common::quick_fit(6);
    let text = serde_json::to_string_pretty(&fit).unwrap();
    let back: FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, fit);
    assert!(back.data.is_some());
}

#[test]
fn invalid_grid_is_rejected() {
    let pattern = synthetic_pattern(7);
    let mut config = quick_config(Strategy::Local, DeltaSpec::Single(1.0), 50);
    config.schedule.levels.clear();
    assert!(fit_process(&pattern, &config).is_err());
}
