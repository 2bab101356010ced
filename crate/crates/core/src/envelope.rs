//! Global rank envelopes with extreme-rank-length ordering, and the combined test.
//!
//! Curve 0 of a pooled set is the observed curve, the rest are simulated.
//! Pointwise ranks are 0-based two-sided midranks: at each `r` a curve gets
//! `min(below, above) + ties / 2`, counting the other curves strictly below,
//! strictly above and tied. Smaller ranks are more extreme.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summaries::{SummaryCurve, SummaryKind};

/// Observed and simulated curves of one statistic on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub kind: SummaryKind,
    pub r: Vec<f64>,
    pub observed: Vec<f64>,
    pub simulated: Vec<Vec<f64>>,
    pub theoretical: Vec<f64>,
}

impl CurveSet {
    pub fn new(kind: SummaryKind, r: Vec<f64>, observed: Vec<f64>, simulated: Vec<Vec<f64>>, theoretical: Vec<f64>) -> Result<Self> {
        let set = CurveSet { kind, r, observed, simulated, theoretical };
        set.validate()?;
        Ok(set)
    }

    pub fn from_curves(observed: &SummaryCurve, simulated: &[SummaryCurve]) -> Result<Self> {
        if let Some(bad) = simulated.iter().find(|c| c.r != observed.r || c.kind != observed.kind) {
            return Err(Error::invalid(format!("curve grids differ for statistic {}", bad.kind.label())));
        }
        CurveSet::new(
            observed.kind,
            observed.r.clone(),
            observed.value.clone(),
            simulated.iter().map(|c| c.value.clone()).collect(),
            observed.theoretical.clone(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.r.len();
        if self.simulated.is_empty() {
            return Err(Error::invalid("a curve set needs at least one simulated curve"));
        }
        if self.observed.len() != m || self.theoretical.len() != m || self.simulated.iter().any(|c| c.len() != m) {
            return Err(Error::invalid(format!("curves of {} do not share the r grid", self.kind.label())));
        }
        Ok(())
    }

    pub fn n_sim(&self) -> usize {
        self.simulated.len()
    }

    /// Columns where every curve is finite.
    pub fn defined_columns(&self) -> Vec<usize> {
        (0..self.r.len())
            .filter(|&k| self.observed[k].is_finite() && self.simulated.iter().all(|c| c[k].is_finite()))
            .collect()
    }

    fn pooled_columns(&self, cols: &[usize]) -> Vec<Vec<f64>> {
        std::iter::once(&self.observed)
            .chain(&self.simulated)
            .map(|c| cols.iter().map(|&k| c[k]).collect())
            .collect()
    }
}

/// Pointwise ranks, extreme ranks and sorted rank vectors of pooled curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranks {
    /// `pointwise[i][k]`: rank of curve `i` at column `k`.
    pub pointwise: Vec<Vec<f64>>,
    pub extreme: Vec<f64>,
    /// Ascending pointwise ranks; lexicographically smaller is more extreme.
    pub erl: Vec<Vec<f64>>,
}

/// Ranks of `curves` (row `i` is curve `i`, all rows equally long).
pub fn extreme_ranks(curves: &[Vec<f64>]) -> Result<Ranks> {
    let n = curves.len();
    if n < 2 {
        return Err(Error::invalid("ranking needs at least two curves"));
    }
    let m = curves[0].len();
    if curves.iter().any(|c| c.len() != m) {
        return Err(Error::invalid("curves differ in length"));
    }
    let mut pointwise = vec![vec![0.0; m]; n];
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| curves[a][k].total_cmp(&curves[b][k]));
        let mut s = 0;
        while s < n {
            let v = curves[order[s]][k];
            let mut e = s + 1;
            while e < n && curves[order[e]][k] == v {
                e += 1;
            }
            let half_ties = (e - s - 1) as f64 / 2.0;
            let rank = (s as f64).min((n - e) as f64) + half_ties;
            for &i in &order[s..e] {
                pointwise[i][k] = rank;
            }
            s = e;
        }
    }
    let extreme = pointwise.iter().map(|p| p.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let erl = pointwise
        .iter()
        .map(|p| {
            let mut v = p.clone();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    Ok(Ranks { pointwise, extreme, erl })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValues {
    pub p_lower: f64,
    pub p_upper: f64,
    pub p_erl: f64,
}

/// Monte Carlo p-values of curve 0 against the rest.
pub fn p_values(ranks: &Ranks) -> PValues {
    let n = ranks.extreme.len() as f64;
    let obs = ranks.extreme[0];
    let sims = &ranks.extreme[1..];
    let strictly = sims.iter().filter(|&&r| r < obs).count() as f64;
    let at_least = sims.iter().filter(|&&r| r <= obs).count() as f64;
    let erl = ranks.erl[1..].iter().filter(|e| lex_cmp(e, &ranks.erl[0]) != Ordering::Greater).count() as f64;
    PValues {
        p_lower: (1.0 + strictly) / n,
        p_upper: (1.0 + at_least) / n,
        p_erl: (1.0 + erl) / n,
    }
}

/// For each pooled curve, the number of curves at least as extreme under the ERL ordering.
pub fn erl_counts(ranks: &Ranks) -> Vec<usize> {
    let n = ranks.erl.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(&ranks.erl[a], &ranks.erl[b]));
    let mut counts = vec![0; n];
    let mut s = 0;
    while s < n {
        let mut e = s + 1;
        while e < n && lex_cmp(&ranks.erl[order[e]], &ranks.erl[order[s]]) == Ordering::Equal {
            e += 1;
        }
        for &i in &order[s..e] {
            counts[i] = e;
        }
        s = e;
    }
    counts
}

/// Pointwise min and max over pooled curves outside the most extreme `alpha` fraction.
fn band(curves: &[Vec<f64>], counts: &[usize], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let m = curves[0].len();
    let limit = alpha * curves.len() as f64;
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for (c, &e) in curves.iter().zip(counts) {
        if e as f64 > limit {
            for j in 0..m {
                lo[j] = lo[j].min(c[j]);
                hi[j] = hi[j].max(c[j]);
            }
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTest {
    pub kind: SummaryKind,
    pub alpha: f64,
    /// Retained distances.
    pub r: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub observed: Vec<f64>,
    pub theoretical: Vec<f64>,
    #[serde(flatten)]
    pub p: PValues,
    pub observed_rank: f64,
    /// Distances where the observed curve leaves the envelope.
    pub violations: Vec<f64>,
    /// Distances dropped because some curve is undefined there.
    pub dropped: Vec<f64>,
}

impl EnvelopeTest {
    pub fn rejects(&self) -> bool {
        self.p.p_erl <= self.alpha
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Global rank envelope test of one statistic.
pub fn rank_envelope(set: &CurveSet, alpha: f64) -> Result<EnvelopeTest> {
    set.validate()?;
    check_alpha(alpha)?;
    let cols = set.defined_columns();
    let dropped = (0..set.r.len()).filter(|k| !cols.contains(k)).map(|k| set.r[k]).collect();
    if cols.is_empty() {
        return Err(Error::invalid(format!("statistic {} has no column defined on every curve", set.kind.label())));
    }
    let pooled = set.pooled_columns(&cols);
    let ranks = extreme_ranks(&pooled)?;
    let (lower, upper) = band(&pooled, &erl_counts(&ranks), alpha);
    let observed = pooled[0].clone();
    let r: Vec<f64> = cols.iter().map(|&c| set.r[c]).collect();
    let violations = (0..r.len()).filter(|&j| observed[j] < lower[j] || observed[j] > upper[j]).map(|j| r[j]).collect();
    Ok(EnvelopeTest {
        kind: set.kind,
        alpha,
        lower,
        upper,
        observed,
        theoretical: cols.iter().map(|&c| set.theoretical[c]).collect(),
        r,
        p: p_values(&ranks),
        observed_rank: ranks.extreme[0],
        violations,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSegment {
    pub kind: SummaryKind,
    pub r: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub observed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedTest {
    pub alpha: f64,
    #[serde(flatten)]
    pub p: PValues,
    pub observed_rank: f64,
    pub n_columns: usize,
    /// Combined envelope mapped back to each statistic's scale.
    pub segments: Vec<EnvelopeSegment>,
}

impl CombinedTest {
    pub fn rejects(&self) -> bool {
        self.p.p_erl <= self.alpha
    }
}

/// Combined test: every statistic is centred and scaled by the pointwise
/// simulated mean and sd, the curves are concatenated and ranked jointly.
///
/// Columns with an undefined value or zero simulated sd are left out.
pub fn combined_envelope(sets: &[CurveSet], alpha: f64) -> Result<CombinedTest> {
    check_alpha(alpha)?;
    let Some(first) = sets.first() else {
        return Err(Error::invalid("combined test needs at least one statistic"));
    };
    let n_sim = first.n_sim();
    if let Some(bad) = sets.iter().find(|s| s.n_sim() != n_sim) {
        return Err(Error::invalid(format!(
            "statistic {} has {} simulations, expected {n_sim}",
            bad.kind.label(),
            bad.n_sim()
        )));
    }
    let mut long = vec![Vec::new(); n_sim + 1];
    let mut layout = Vec::new();
    for set in sets {
        set.validate()?;
        let mut cols = Vec::new();
        let mut centre = Vec::new();
        let mut scale = Vec::new();
        for k in set.defined_columns() {
            let mean = set.simulated.iter().map(|c| c[k]).sum::<f64>() / n_sim as f64;
            let var = set.simulated.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / (n_sim.max(2) - 1) as f64;
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                cols.push(k);
                centre.push(mean);
                scale.push(sd);
            }
        }
        let pooled = set.pooled_columns(&cols);
        for (i, curve) in pooled.iter().enumerate() {
            long[i].extend(curve.iter().zip(&centre).zip(&scale).map(|((v, m), s)| (v - m) / s));
        }
        layout.push((set, cols, centre, scale));
    }
    let n_columns = long[0].len();
    if n_columns == 0 {
        return Err(Error::invalid("no column varies across the simulated curves"));
    }
    let ranks = extreme_ranks(&long)?;
    let (lo, hi) = band(&long, &erl_counts(&ranks), alpha);
    let mut offset = 0;
    let segments = layout
        .into_iter()
        .map(|(set, cols, centre, scale)| {
            let span = offset..offset + cols.len();
            offset += cols.len();
            let unscale = |v: &[f64]| -> Vec<f64> { v[span.clone()].iter().zip(&centre).zip(&scale).map(|((z, m), s)| m + s * z).collect() };
            EnvelopeSegment {
                kind: set.kind,
                r: cols.iter().map(|&c| set.r[c]).collect(),
                lower: unscale(&lo),
                upper: unscale(&hi),
                observed: cols.iter().map(|&c| set.observed[c]).collect(),
            }
        })
        .collect();
    Ok(CombinedTest {
        alpha,
        p: p_values(&ranks),
        observed_rank: ranks.extreme[0],
        n_columns,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(observed: Vec<f64>, simulated: Vec<Vec<f64>>) -> CurveSet {
        let m = observed.len();
        CurveSet::new(SummaryKind::L, (0..m).map(|k| k as f64).collect(), observed, simulated, vec![0.0; m]).unwrap()
    }

    #[test]
    fn strictly_dominated_observed() {
        // a different simulation is on top in each column
        let sims: Vec<Vec<f64>> = (0..19).map(|i| (0..3).map(|k| 1.0 + ((i + 7 * k) % 19) as f64).collect()).collect();
        let t = rank_envelope(&set(vec![0.0, 0.0, 0.0], sims), 0.05).unwrap();
        assert_eq!(t.observed_rank, 0.0);
        // the three column maxima share extreme rank 0 with the observed curve
        assert_eq!((t.p.p_lower, t.p.p_upper, t.p.p_erl), (0.05, 4.0 / 20.0, 0.05));
        assert!(t.rejects() && !t.violations.is_empty());
    }

    #[test]
    fn total_tie() {
        let sims = vec![vec![1.0, 2.0]; 9];
        let t = rank_envelope(&set(vec![1.0, 2.0], sims), 0.05).unwrap();
        assert_eq!(t.p.p_upper, 1.0);
        assert_eq!(t.p.p_lower, 0.1);
        assert_eq!(t.p.p_erl, 1.0);
        assert!(t.violations.is_empty());
    }

    #[test]
    fn three_curve_hand_ranks() {
        let curves = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 4.0]];
        let r = extreme_ranks(&curves).unwrap();
        // column 0: ascending 1,2,3; column 1: 4 then two 5s tied
        assert_eq!(r.pointwise[0], vec![0.0, 0.5]);
        assert_eq!(r.pointwise[1], vec![1.0, 0.5]);
        assert_eq!(r.pointwise[2], vec![0.0, 0.0]);
        assert_eq!(r.extreme, vec![0.0, 0.5, 0.0]);
        // curve 2 ties curve 0 on extreme rank but has the shorter run of small ranks
        assert_eq!(lex_cmp(&r.erl[2], &r.erl[0]), Ordering::Less);
    }

    fn brute_rank(curves: &[Vec<f64>], i: usize, k: usize) -> f64 {
        let v = curves[i][k];
        let below = curves.iter().enumerate().filter(|&(j, c)| j != i && c[k] < v).count() as f64;
        let above = curves.iter().enumerate().filter(|&(j, c)| j != i && c[k] > v).count() as f64;
        let ties = curves.iter().enumerate().filter(|&(j, c)| j != i && c[k] == v).count() as f64;
        below.min(above) + ties / 2.0
    }

    #[test]
    fn undefined_columns_are_dropped() {
        let mut sims: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, f64::NAN, 1.0]).collect();
        sims[3][2] = f64::NAN;
        let t = rank_envelope(&set(vec![4.5, 1.0, 1.0], sims), 0.1).unwrap();
        assert_eq!(t.r, vec![0.0]);
        assert_eq!(t.dropped, vec![1.0, 2.0]);
    }

    #[test]
    fn combined_bookkeeping_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mk = |rng: &mut ChaCha8Rng, m: usize| -> CurveSet {
            let sims = (0..19).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
            set((0..m).map(|_| rng.random::<f64>()).collect(), sims)
        };
        let a = mk(&mut rng, 5);
        let b = mk(&mut rng, 7);
        let c = combined_envelope(&[a.clone(), b.clone()], 0.05).unwrap();
        assert_eq!(c.n_columns, 12);
        assert_eq!(c.segments[0].r.len() + c.segments[1].r.len(), 12);
        let mut short = b.clone();
        short.simulated.pop();
        assert!(combined_envelope(&[a, short], 0.05).is_err());
    }

    #[test]
    fn combined_detects_one_violated_statistic() {
        let mut hits = 0;
        for rep in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + rep);
            let mut noise = |shift: f64, m: usize| -> Vec<f64> { (0..m).map(|_| rng.random::<f64>() + shift).collect() };
            let null: Vec<CurveSet> = (0..5).map(|_| set(noise(0.0, 10), (0..99).map(|_| noise(0.0, 10)).collect())).collect();
            let bad = set(noise(3.0, 10), (0..99).map(|_| noise(0.0, 10)).collect());
            let mut all = null;
            all.push(bad);
            if combined_envelope(&all, 0.05).unwrap().p.p_erl < 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 45, "{hits}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn ranks_and_p_interval(seed in 0u64..10_000, n_sim in 5usize..40, m in 1usize..8, levels in 2u32..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // coarse values produce ties
            let curves: Vec<Vec<f64>> = (0..=n_sim).map(|_| (0..m).map(|_| rng.random_range(0..levels) as f64).collect()).collect();
            let ranks = extreme_ranks(&curves).unwrap();
            for i in 0..=n_sim {
                for k in 0..m {
                    prop_assert_eq!(ranks.pointwise[i][k], brute_rank(&curves, i, k));
                }
            }
            let p = p_values(&ranks);
            prop_assert!(p.p_lower <= p.p_erl && p.p_erl <= p.p_upper);
        }

        #[test]
        fn envelope_membership_matches_erl_p(seed in 0u64..10_000, n_sim in 19usize..60, m in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sims: Vec<Vec<f64>> = (0..n_sim).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
            let shift = rng.random_range(-1.0..1.0);
            let obs: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + shift).collect();
            let s = set(obs, sims);
            for alpha in [0.05, 0.1, 0.2] {
                let t = rank_envelope(&s, alpha).unwrap();
                prop_assert_eq!(t.violations.is_empty(), t.p.p_erl > alpha);
            }
            let narrow = rank_envelope(&s, 0.2).unwrap();
            let wide = rank_envelope(&s, 0.05).unwrap();
            for j in 0..m {
                prop_assert!(wide.lower[j] <= narrow.lower[j] && wide.upper[j] >= narrow.upper[j]);
            }
        }
    }
}
