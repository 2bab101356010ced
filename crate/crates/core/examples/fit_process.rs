//! Simulates a regular pattern from known parameters and recovers them.
//!
//! Run with `cargo run --release --example fit_process`.

use scmpp::estimation::{fit_process, DeltaSpec, FitConfig, Strategy};
use scmpp::likelihood::{GridLevel, QuadratureSchedule, ScParameters};
use scmpp::pattern::{MarkedPattern, MarkedPoint, Window};
use scmpp::simulation::simulate_points;
use scmpp::time_mapping::TimeMapping;

fn main() -> scmpp::Result<()> {
    let window = Window::new(0.0, 50.0, 0.0, 50.0)?;
    let truth = ScParameters::from_array([5.5, 0.5, 0.01, 3.0, 2.0, 0.0, 0.0, 0.0]);
    let (events, _) = simulate_points(&truth, &window, (25.0, 25.0), (0.0, 1.0), false, 7)?;
    let mapping = TimeMapping::new(1.0, 1.0, 40.0)?;
    let points = events
        .iter()
        .map(|&(t, x, y)| Ok(MarkedPoint::new(x, y, mapping.time_to_size(t)?)))
        .collect::<scmpp::Result<Vec<_>>>()?;
    let pattern = MarkedPattern::new(window, points)?;
    println!("{} points", pattern.len());

    let schedule = QuadratureSchedule::single([1.0, 50.0, 50.0], GridLevel::new(20, 20, 20));
    let fit = fit_process(&pattern, &FitConfig::new(schedule, Strategy::GlobalLocal, DeltaSpec::Single(1.0)))?;
    println!("objective {:.4} ({:?})", fit.objective, fit.status);
    let names = ["alpha1", "beta1", "gamma1", "alpha2", "beta2", "alpha3", "beta3", "gamma3"];
    for ((name, est), tru) in names.iter().zip(fit.parameters.to_array()).zip(truth.to_array()) {
        println!("{name:>7} {est:>10.4} (true {tru})");
    }
    Ok(())
}
