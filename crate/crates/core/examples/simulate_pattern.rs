//! Simulates marked realizations from a fitted process, with marks mapped from arrival times.

use scmpp::estimation::{fit_process, DeltaSpec, FitConfig, Strategy};
use scmpp::likelihood::{GridLevel, QuadratureSchedule, ScParameters};
use scmpp::pattern::{nn_distance_summary, MarkedPattern, MarkedPoint, Window};
use scmpp::simulation::{fit_time_mapping, simulate_mpp, simulate_points, MarkMode, MarkSource, SimConfig};
use scmpp::time_mapping::TimeMapping;

fn main() -> scmpp::Result<()> {
    let window = Window::new(0.0, 50.0, 0.0, 50.0)?;
    let truth = ScParameters::from_array([5.0, 0.0, 0.0, 4.0, 3.0, 0.0, 0.0, 0.0]);
    let (events, _) = simulate_points(&truth, &window, (10.0, 10.0), (0.0, 1.0), false, 11)?;
    let mapping = TimeMapping::new(0.5, 2.0, 30.0)?;
    let points = events
        .iter()
        .map(|&(t, x, y)| Ok(MarkedPoint::new(x, y, mapping.time_to_size(t)?)))
        .collect::<scmpp::Result<Vec<_>>>()?;
    let pattern = MarkedPattern::new(window, points)?;

    let schedule = QuadratureSchedule::single([1.0, 50.0, 50.0], GridLevel::new(16, 16, 16));
    let fit = fit_process(&pattern, &FitConfig::new(schedule, Strategy::GlobalLocal, DeltaSpec::Single(0.5)))?;
    let observed = nn_distance_summary(&pattern)?;
    println!("observed: {} points, mean nn distance {:.3}", pattern.len(), observed.mean);

    let marks = MarkSource::Mapping(fit_time_mapping(&fit)?);
    for seed in 1..=5 {
        let config = SimConfig { mark_mode: MarkMode::TimeToSize, seed, ..SimConfig::default() };
        let real = simulate_mpp(&fit, marks, &config)?;
        let sim = MarkedPattern::new(window, real.locations().iter().map(|&(x, y)| MarkedPoint::new(x, y, 1.0)).collect())?;
        let marks = real.marks();
        println!(
            "seed {seed}: {} points, mean nn distance {:.3}, mark range [{:.2}, {:.2}], thinned {}",
            real.events.len(),
            nn_distance_summary(&sim)?.mean,
            marks.iter().copied().fold(f64::INFINITY, f64::min),
            marks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            real.diagnostics.n_thinned,
        );
    }
    Ok(())
}
