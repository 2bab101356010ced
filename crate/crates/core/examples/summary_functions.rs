//! L, F, G, J, E and V for a uniform pattern next to a hard-core one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scmpp::pattern::{MarkedPattern, MarkedPoint, Window};
use scmpp::summaries::{summaries, EstimatorOptions, SummaryKind};

fn uniform(n: usize, rng: &mut ChaCha8Rng) -> Vec<MarkedPoint> {
    (0..n)
        .map(|_| MarkedPoint::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(1.0..5.0)))
        .collect()
}

/// Sequential inhibition: proposals closer than `h` to an accepted point are dropped.
fn hard_core(n: usize, h: f64, rng: &mut ChaCha8Rng) -> Vec<MarkedPoint> {
    let mut out: Vec<MarkedPoint> = Vec::new();
    while out.len() < n {
        let p = uniform(1, rng)[0];
        if out.iter().all(|q| (q.x - p.x).hypot(q.y - p.y) >= h) {
            out.push(p);
        }
    }
    out
}

fn main() -> scmpp::Result<()> {
    let window = Window::new(0.0, 1.0, 0.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let options = EstimatorOptions { n_r: 26, ..EstimatorOptions::default() };
    for (label, points) in [("uniform", uniform(150, &mut rng)), ("hard core", hard_core(150, 0.05, &mut rng))] {
        let pattern = MarkedPattern::new(window, points)?;
        println!("{label}");
        for curve in summaries(&pattern, &SummaryKind::ALL, &options)? {
            let i = curve.r.len() / 5;
            println!(
                "  {}({:.3}) = {:>8.4}   reference {:>8.4}",
                curve.kind.label(),
                curve.r[i],
                curve.value[i],
                curve.theoretical[i]
            );
        }
    }
    Ok(())
}
