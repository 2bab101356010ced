use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scmpp::pattern::{MarkedPattern, MarkedPoint, Window};
use scmpp::summaries::{summaries, summary, EstimatorOptions, FgCorrection, SummaryCurve, SummaryKind};

fn unit() -> Window {
    Window::new(0.0, 1.0, 0.0, 1.0).unwrap()
}

fn binomial(n: usize, seed: u64) -> MarkedPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| MarkedPoint::new(rng.random(), rng.random(), rng.random_range(1.0..5.0))).collect();
    MarkedPattern::new(unit(), points).unwrap()
}

/// Jittered 10 x 10 lattice: nearest neighbours never closer than 0.08.
fn lattice() -> MarkedPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points = (0..100)
        .map(|k| {
            let (i, j) = ((k % 10) as f64, (k / 10) as f64);
            MarkedPoint::new(0.05 + 0.1 * i + rng.random_range(-0.01..0.01), 0.05 + 0.1 * j + rng.random_range(-0.01..0.01), 2.0)
        })
        .collect();
    MarkedPattern::new(unit(), points).unwrap()
}

#[test]
fn csr_l_function_is_close_to_identity() {
    let options = EstimatorOptions { r_max: Some(0.2), n_r: 41, ..EstimatorOptions::default() };
    let reps = 60;
    let mut mean = vec![0.0; 41];
    for seed in 0..reps {
        let curve = summary(&binomial(150, seed), SummaryKind::L, &options).unwrap();
        for (m, v) in mean.iter_mut().zip(&curve.value) {
            *m += v / reps as f64;
        }
    }
    let r = options.r_grid(&unit()).unwrap();
    for (r, m) in r.iter().zip(&mean) {
        assert!((m - r).abs() < 0.03, "mean L({r}) = {m}");
    }
}

#[test]
fn hard_core_g_is_zero_and_j_above_one_inside_the_core() {
    let pattern = lattice();
    for fg in [FgCorrection::Km, FgCorrection::Rs] {
        let options = EstimatorOptions { r_max: Some(0.12), n_r: 25, fg_correction: fg, ..EstimatorOptions::default() };
        let curves = summaries(&pattern, &[SummaryKind::G, SummaryKind::J], &options).unwrap();
        let (g, j) = (&curves[0], &curves[1]);
        for k in 0..g.r.len() {
            if g.r[k] < 0.08 {
                assert_eq!(g.value[k], 0.0, "G({}) with {fg:?}", g.r[k]);
                if j.value[k].is_finite() {
                    assert!(j.value[k] >= 1.0, "J({}) = {} with {fg:?}", j.r[k], j.value[k]);
                }
            }
        }
    }
}

#[test]
fn undefined_values_become_null_in_json() {
    let points = vec![MarkedPoint::new(0.2, 0.2, 1.0), MarkedPoint::new(0.25, 0.2, 2.0), MarkedPoint::new(0.8, 0.7, 3.0)];
    let pattern = MarkedPattern::new(unit(), points).unwrap();
    let options = EstimatorOptions { r_max: Some(0.5), n_r: 51, ..EstimatorOptions::default() };
    let curve = summary(&pattern, SummaryKind::J, &options).unwrap();
    let undefined = curve.value.iter().filter(|v| v.is_nan()).count();
    assert!(undefined > 0);
    let text = serde_json::to_string(&curve).unwrap();
    assert_eq!(text.matches("null").count(), undefined + usize::from(curve.support.is_none()));
    let back: SummaryCurve = serde_json::from_str(&text).unwrap();
    assert_eq!(back.value.iter().filter(|v| v.is_nan()).count(), undefined);
    for (a, b) in back.value.iter().zip(&curve.value) {
        assert!(a == b || (a.is_nan() && b.is_nan()));
    }
}

#[test]
fn every_statistic_shares_the_distance_grid() {
    let pattern = binomial(80, 11);
    let options = EstimatorOptions::default();
    let curves = summaries(&pattern, &SummaryKind::ALL, &options).unwrap();
    let r = options.r_grid(&pattern.window).unwrap();
    assert_eq!(curves.len(), 6);
    for c in &curves {
        assert_eq!(c.r, r);
        assert_eq!(c.value.len(), r.len());
    }
}
