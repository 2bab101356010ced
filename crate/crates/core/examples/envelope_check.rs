//! Global envelope check of a fitted model against its own simulations.

use scmpp::check::{check_with_time_marks, CheckOptions};
use scmpp::estimation::{fit_process, DeltaSpec, FitConfig, Strategy};
use scmpp::likelihood::{GridLevel, QuadratureSchedule, ScParameters};
use scmpp::pattern::{MarkedPattern, MarkedPoint, Window};
use scmpp::simulation::simulate_points;
use scmpp::time_mapping::TimeMapping;

fn main() -> scmpp::Result<()> {
    let window = Window::new(0.0, 50.0, 0.0, 50.0)?;
    let truth = ScParameters::from_array([5.0, 0.0, 0.0, 3.0, 2.0, 0.0, 0.0, 0.0]);
    let (events, _) = simulate_points(&truth, &window, (25.0, 25.0), (0.0, 1.0), false, 3)?;
    let mapping = TimeMapping::new(1.0, 1.0, 20.0)?;
    let points = events
        .iter()
        .map(|&(t, x, y)| Ok(MarkedPoint::new(x, y, mapping.time_to_size(t)?)))
        .collect::<scmpp::Result<Vec<_>>>()?;
    let pattern = MarkedPattern::new(window, points)?;
    let schedule = QuadratureSchedule::single([1.0, 50.0, 50.0], GridLevel::new(16, 16, 16));
    let fit = fit_process(&pattern, &FitConfig::new(schedule, Strategy::GlobalLocal, DeltaSpec::Single(1.0)))?;

    let options = CheckOptions { n_sim: 199, seed: 42, ..CheckOptions::default() };
    let result = check_with_time_marks(&fit, &options)?;
    for w in &result.warnings {
        println!("note: {w}");
    }
    for test in &result.statistics {
        println!(
            "{}: p in [{:.3}, {:.3}], erl p {:.3}, {} distances outside",
            test.kind.label(),
            test.p.p_lower,
            test.p.p_upper,
            test.p.p_erl,
            test.violations.len()
        );
    }
    println!("combined p {:.3}", result.combined_p());
    Ok(())
}
