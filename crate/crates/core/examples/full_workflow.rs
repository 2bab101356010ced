//! The four-step workflow through the command-line entry point:
//! fit, train marks, check, then simulate and plot.
//!
//! Files land in `$TMPDIR/scmpp-workflow`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scmpp::io::{pattern_to_csv, write_text};
use scmpp::pattern::{MarkedPattern, MarkedPoint, Window};

fn run(args: &[&str]) {
    println!("$ scmpp {}", args.join(" "));
    let status = scmpp::cli::run(std::iter::once("scmpp").chain(args.iter().copied()));
    assert_eq!(status, 0, "command failed");
}

fn main() -> scmpp::Result<()> {
    let dir = std::env::temp_dir().join("scmpp-workflow");
    std::fs::create_dir_all(&dir).map_err(|e| scmpp::Error::InvalidInput(e.to_string()))?;
    std::env::set_current_dir(&dir).map_err(|e| scmpp::Error::InvalidInput(e.to_string()))?;

    // sizes shrink away from a cluster centre so the marks carry location signal
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut points: Vec<MarkedPoint> = Vec::new();
    while points.len() < 120 {
        let (x, y) = (rng.random_range(0.0..50.0), rng.random_range(0.0..50.0));
        if points.iter().all(|p| (p.x - x).hypot(p.y - y) > 1.5) {
            let size = 40.0 * (-((x - 20.0).powi(2) + (y - 30.0).powi(2)) / 800.0).exp() + rng.random_range(0.5..3.0);
            points.push(MarkedPoint::new(x, y, size));
        }
    }
    let pattern = MarkedPattern::new(Window::new(0.0, 50.0, 0.0, 50.0)?, points)?;
    write_text("pts.csv".as_ref(), &pattern_to_csv(&pattern))?;
    write_text("grids.json".as_ref(), r#"{ "upper_bounds": [1, 50, 50], "levels": [[8, 8, 8], [16, 16, 16]] }"#)?;

    let common = ["--seed", "90210", "--deterministic"];
    let with = |rest: &[&'static str]| -> Vec<&'static str> { common.iter().chain(rest).copied().collect() };
    run(&with(&["fit", "--data", "pts.csv", "--window", "0,50,0,50", "--delta", "0.5,1", "--grids", "grids.json",
        "--strategy", "multires-global-local", "--out", "fit.json"]));
    run(&with(&["train-mark", "--data", "pts.csv", "--window", "0,50,0,50", "--fit", "fit.json", "--radius", "8",
        "--tuning-grid-size", "4", "--out", "mark.json"]));
    run(&with(&["check", "--fit", "fit.json", "--mark", "mark.json", "--n-sim", "99", "--out", "check.json",
        "--plot", "check.svg"]));
    run(&with(&["simulate", "--fit", "fit.json", "--mark", "mark.json", "--out", "sim.csv", "--plot", "sim.svg"]));
    run(&with(&["summaries", "--realization", "sim.csv", "--statistics", "L,J", "--out", "sim_curves.csv"]));
    println!("outputs in {}", dir.display());
    Ok(())
}
