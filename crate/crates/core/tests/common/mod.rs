#![allow(dead_code)]

use scmpp::estimation::{fit_process, Budget, BudgetSchedule, DeltaSpec, FitConfig, FitResult, Strategy};
use scmpp::likelihood::{GridLevel, QuadratureSchedule, ScParameters};
use scmpp::pattern::{MarkedPattern, MarkedPoint, Window};
use scmpp::simulation::simulate_points;
use scmpp::time_mapping::TimeMapping;

pub fn square(side: f64) -> Window {
    Window::new(0.0, side, 0.0, side).unwrap()
}

/// Mildly inhibited pattern in [0,30]^2 with sizes mapped from simulated times.
pub fn synthetic_pattern(seed: u64) -> MarkedPattern {
    let w = square(30.0);
    let truth = ScParameters::from_array([4.0, 0.0, 0.01, 2.0, 2.0, 0.0, 0.0, 0.0]);
    let (events, _) = simulate_points(&truth, &w, (15.0, 15.0), (0.0, 1.0), true, seed).unwrap();
    let mapping = TimeMapping::new(1.0, 0.5, 20.0).unwrap();
    let points = events.iter().map(|&(t, x, y)| MarkedPoint::new(x, y, mapping.time_to_size(t).unwrap())).collect();
    MarkedPattern::new(w, points).unwrap()
}

pub fn quick_config(strategy: Strategy, delta: DeltaSpec, maxeval: usize) -> FitConfig {
    let schedule = QuadratureSchedule::single([1.0, 30.0, 30.0], GridLevel::new(8, 8, 8));
    let mut config = FitConfig::new(schedule, strategy, delta);
    let b = Budget::new(maxeval, 1e-6, 1e-5);
    config.budgets = BudgetSchedule { global: b, local_first: b, local_refine: b };
    config
}

pub fn quick_fit(seed: u64) -> FitResult {
    fit_process(&synthetic_pattern(seed), &quick_config(Strategy::Local, DeltaSpec::Single(1.0), 200)).unwrap()
}
