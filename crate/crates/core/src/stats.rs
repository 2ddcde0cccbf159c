//! Error metrics and paired bounded-vs-unbounded comparison statistics.
//!
//! All functions are pure. Non-finite estimates never reach the metric
//! functions: pairing drops them and reports how many were dropped.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Largest nonzero sample size handled by the exact null distribution.
pub const WILCOXON_EXACT_MAX: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("all differences are zero")]
    Degenerate,
}

/// Sample mean with its `n - 1` standard deviation (absent for one value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: Option<f64>,
}

pub fn mean_sd(values: &[f64]) -> Result<MeanSd, StatsError> {
    let n = values.len();
    if n == 0 {
        return Err(StatsError::InsufficientData { needed: 1, got: 0 });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n > 1).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    });
    Ok(MeanSd { mean, sd })
}

fn deviations(estimates: &[f64], ideals: &[f64], f: impl Fn(f64) -> f64) -> Result<Vec<f64>, StatsError> {
    if estimates.len() != ideals.len() {
        return Err(StatsError::LengthMismatch {
            left: estimates.len(),
            right: ideals.len(),
        });
    }
    Ok(estimates.iter().zip(ideals).map(|(e, i)| f(e - i)).collect())
}

pub fn mae(estimates: &[f64], ideals: &[f64]) -> Result<MeanSd, StatsError> {
    mean_sd(&deviations(estimates, ideals, f64::abs)?)
}

pub fn mse(estimates: &[f64], ideals: &[f64]) -> Result<MeanSd, StatsError> {
    mean_sd(&deviations(estimates, ideals, |d| d * d)?)
}

/// Positive when the bounded estimate is closer to the ideal value.
pub fn improvement(unbounded: f64, bounded: f64, ideal: f64) -> f64 {
    (unbounded - ideal).abs() - (bounded - ideal).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    /// Sample size after dropping zeros.
    pub n: usize,
    pub method: WilcoxonMethod,
}

/// Mid-ranks of `values` (ascending, 1-based) with the tie group sizes.
fn mid_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon signed-rank test. Zeros are discarded and tied
/// magnitudes share mid-ranks.
pub fn wilcoxon_signed_rank(delta: &[f64]) -> Result<Wilcoxon, StatsError> {
    let nonzero: Vec<f64> = delta.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(StatsError::Degenerate);
    }
    let n = nonzero.len();
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = mid_ranks(&magnitudes);
    let w_plus: f64 = nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);

    let (p, method) = if n <= WILCOXON_EXACT_MAX {
        (exact_lower_tail(&ranks, statistic), WilcoxonMethod::Exact)
    } else {
        let mean = total / 2.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - tie_term;
        let z = (statistic - mean + 0.5).min(0.0) / var.sqrt();
        let normal = Normal::standard();
        (normal.cdf(z), WilcoxonMethod::Normal)
    };
    Ok(Wilcoxon {
        statistic,
        w_plus,
        w_minus,
        p_value: (2.0 * p).clamp(f64::MIN_POSITIVE, 1.0),
        n,
        method,
    })
}

/// `P(W+ <= statistic)` under the sign-flip null.
///
/// Mid-ranks are half-integers, so doubled ranks index an integer DP over
/// subset sums.
fn exact_lower_tail(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max_sum + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (2.0 * statistic).round() as usize;
    let below: f64 = counts[..=limit.min(max_sum)].iter().sum();
    below / 2f64.powi(ranks.len() as i32)
}

/// Holm step-down adjustment; output is in input order.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (i, &idx) in order.iter().enumerate() {
        running = running.max(p_values[idx] * (m - i) as f64).min(1.0);
        adjusted[idx] = running;
    }
    adjusted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectCategory {
    Negligible,
    Small,
    Medium,
    Large,
}

impl EffectCategory {
    pub fn from_magnitude(d: f64) -> Self {
        match d.abs() {
            x if x < 0.2 => Self::Negligible,
            x if x < 0.5 => Self::Small,
            x if x < 0.8 => Self::Medium,
            _ => Self::Large,
        }
    }
}

impl fmt::Display for EffectCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Negligible => "negligible",
            Self::Small => "small",
            Self::Medium => "medium",
            Self::Large => "large",
        })
    }
}

/// Paired Cohen's d; `None` when the differences have no spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub d: Option<f64>,
    pub category: Option<EffectCategory>,
}

pub fn cohens_d_paired(delta: &[f64]) -> Result<EffectSize, StatsError> {
    if delta.len() < 2 {
        return Err(StatsError::InsufficientData {
            needed: 2,
            got: delta.len(),
        });
    }
    let MeanSd { mean, sd } = mean_sd(delta)?;
    let sd = sd.unwrap_or(0.0);
    // Rounding in the mean leaves a residual spread of a few ulps.
    let scale = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if sd <= 1e-12 * scale || sd == 0.0 {
        return Ok(EffectSize { d: None, category: None });
    }
    let d = mean / sd;
    Ok(EffectSize {
        d: Some(d),
        category: Some(EffectCategory::from_magnitude(d)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    /// `(x, F(x))` at each distinct clamped value.
    pub points: Vec<(f64, f64)>,
    pub fraction_positive: f64,
}

pub fn ecdf_winsorized(delta: &[f64], cap: f64) -> Result<Ecdf, StatsError> {
    if delta.is_empty() {
        return Err(StatsError::InsufficientData { needed: 1, got: 0 });
    }
    let n = delta.len() as f64;
    let mut clamped: Vec<f64> = delta.iter().map(|d| d.clamp(-cap, cap)).collect();
    clamped.sort_by(f64::total_cmp);
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in clamped.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => points.push((x, f)),
        }
    }
    if let Some(last) = points.last_mut() {
        last.1 = 1.0;
    }
    let positive = delta.iter().filter(|d| **d > 0.0).count();
    Ok(Ecdf {
        points,
        fraction_positive: positive as f64 / n,
    })
}

/// Per-record outcome of one arm: the finite estimate, or `None` if the fit
/// was filtered out.
pub type ArmOutcomes = BTreeMap<String, Option<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub max_count: usize,
    pub finite_bounded: usize,
    pub finite_unbounded: usize,
    pub matched: Vec<String>,
    pub coverage_bounded: f64,
    pub coverage_unbounded: f64,
    pub coverage_matched: f64,
}

impl Coverage {
    pub fn k(&self) -> usize {
        self.matched.len()
    }
}

pub fn coverage_summary(bounded: &ArmOutcomes, unbounded: &ArmOutcomes, max_count: usize) -> Coverage {
    let finite = |arm: &ArmOutcomes| arm.values().filter(|v| v.is_some_and(f64::is_finite)).count();
    let matched: Vec<String> = bounded
        .iter()
        .filter(|(id, b)| {
            b.is_some_and(f64::is_finite) && unbounded.get(*id).is_some_and(|u| u.is_some_and(f64::is_finite))
        })
        .map(|(id, _)| id.clone())
        .collect();
    let frac = |c: usize| if max_count == 0 { 0.0 } else { c as f64 / max_count as f64 };
    let (fb, fu) = (finite(bounded), finite(unbounded));
    Coverage {
        max_count,
        finite_bounded: fb,
        finite_unbounded: fu,
        coverage_bounded: frac(fb),
        coverage_unbounded: frac(fu),
        coverage_matched: frac(matched.len()),
        matched,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    /// Model family without the bounded flag, e.g. `exp:a=free`.
    pub family: String,
    pub lambda_set: String,
    pub backend: String,
    pub width: String,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}|{}", self.family, self.lambda_set, self.backend, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub group: GroupKey,
    pub k: usize,
    pub max_count: usize,
    pub excluded_bounded: usize,
    pub excluded_unbounded: usize,
    pub coverage_bounded: f64,
    pub coverage_unbounded: f64,
    pub coverage_matched: f64,
    pub mae_bounded: Option<MeanSd>,
    pub mae_unbounded: Option<MeanSd>,
    pub mse_bounded: Option<MeanSd>,
    pub mse_unbounded: Option<MeanSd>,
    pub delta: Vec<f64>,
    pub wilcoxon: Option<Wilcoxon>,
    pub holm_p: Option<f64>,
    pub effect: Option<EffectSize>,
}

impl PairedSummary {
    pub fn wilcoxon_p(&self) -> Option<f64> {
        self.wilcoxon.map(|w| w.p_value)
    }
}

/// Builds one group's summary. Metrics are computed over matched pairs only,
/// in record-id order.
pub fn summarize_pairs(
    group: GroupKey,
    bounded: &ArmOutcomes,
    unbounded: &ArmOutcomes,
    ideals: &BTreeMap<String, f64>,
    max_count: usize,
) -> PairedSummary {
    let coverage = coverage_summary(bounded, unbounded, max_count);
    let mut est_b = Vec::with_capacity(coverage.k());
    let mut est_u = Vec::with_capacity(coverage.k());
    let mut ideal = Vec::with_capacity(coverage.k());
    for id in &coverage.matched {
        let Some(&truth) = ideals.get(id) else { continue };
        est_b.push(bounded[id].expect("matched ids are finite"));
        est_u.push(unbounded[id].expect("matched ids are finite"));
        ideal.push(truth);
    }
    let delta: Vec<f64> = est_u
        .iter()
        .zip(&est_b)
        .zip(&ideal)
        .map(|((u, b), i)| improvement(*u, *b, *i))
        .collect();
    PairedSummary {
        group,
        k: delta.len(),
        max_count,
        excluded_bounded: bounded.len() - coverage.finite_bounded,
        excluded_unbounded: unbounded.len() - coverage.finite_unbounded,
        coverage_bounded: coverage.coverage_bounded,
        coverage_unbounded: coverage.coverage_unbounded,
        coverage_matched: coverage.coverage_matched,
        mae_bounded: mae(&est_b, &ideal).ok(),
        mae_unbounded: mae(&est_u, &ideal).ok(),
        mse_bounded: mse(&est_b, &ideal).ok(),
        mse_unbounded: mse(&est_u, &ideal).ok(),
        wilcoxon: wilcoxon_signed_rank(&delta).ok(),
        holm_p: None,
        effect: cohens_d_paired(&delta).ok(),
        delta,
    }
}

/// Fills `holm_p` across every summary that has a Wilcoxon p-value.
pub fn apply_holm(summaries: &mut [PairedSummary]) {
    let tested: Vec<usize> = (0..summaries.len()).filter(|&i| summaries[i].wilcoxon.is_some()).collect();
    let raw: Vec<f64> = tested.iter().filter_map(|&i| summaries[i].wilcoxon_p()).collect();
    for (&i, p) in tested.iter().zip(holm_adjust(&raw)) {
        summaries[i].holm_p = Some(p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mae_examples() {
        let m = mae(&[0.9, 1.1], &[1.0, 1.0]).unwrap();
        assert!(close(m.mean, 0.1, 1e-15) && close(m.sd.unwrap(), 0.0, 1e-15));
        assert_eq!(mae(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), MeanSd { mean: 0.0, sd: Some(0.0) });
        let m = mae(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.mean, 0.5);
        assert!(close(m.sd.unwrap(), 0.5f64.sqrt(), 1e-15));
        assert_eq!(mae(&[0.2], &[0.0]).unwrap().sd, None);
        assert!(matches!(mae(&[], &[]), Err(StatsError::InsufficientData { .. })));
    }

    #[test]
    fn mse_examples() {
        let m = mse(&[0.9, 1.1], &[1.0, 1.0]).unwrap();
        assert!(close(m.mean, 0.01, 1e-15) && close(m.sd.unwrap(), 0.0, 1e-15));
        assert_eq!(mse(&[1.0], &[1.0]).unwrap().mean, 0.0);
        let m = mse(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.mean, 0.5);
        assert!(close(m.sd.unwrap(), 0.5f64.sqrt(), 1e-15));
    }

    #[test]
    fn improvement_sign() {
        assert!(close(improvement(1.5, 0.9, 1.0), 0.4, 1e-15));
        assert_eq!(improvement(0.7, 0.7, 1.0), 0.0);
        assert!(close(improvement(0.9, 1.5, 1.0), -0.4, 1e-15));
    }

    #[test]
    fn wilcoxon_examples() {
        let w = wilcoxon_signed_rank(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert_eq!(w.w_minus, 0.0);
        assert_eq!(w.p_value, 0.0625);
        assert_eq!(wilcoxon_signed_rank(&[1.0, -1.0]).unwrap().p_value, 1.0);
        assert_eq!(wilcoxon_signed_rank(&[0.0, 0.0, 0.0]), Err(StatsError::Degenerate));
    }

    #[test]
    fn wilcoxon_drops_zeros() {
        let a = wilcoxon_signed_rank(&[0.0, 0.1, 0.2, 0.0, -0.3]).unwrap();
        let b = wilcoxon_signed_rank(&[0.1, 0.2, -0.3]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n, 3);
    }

    #[test]
    fn wilcoxon_normal_regime() {
        // 30 positive values: T = 0, mean 232.5, var 2363.75.
        let delta: Vec<f64> = (1..=30).map(f64::from).collect();
        let w = wilcoxon_signed_rank(&delta).unwrap();
        assert_eq!(w.method, WilcoxonMethod::Normal);
        let z = (0.0 - 232.5 + 0.5) / 2363.75f64.sqrt();
        let expected = 2.0 * Normal::standard().cdf(z);
        assert!(close(w.p_value, expected, 1e-15));
        let neg: Vec<f64> = delta.iter().map(|d| -d).collect();
        assert_eq!(w.p_value, wilcoxon_signed_rank(&neg).unwrap().p_value);
    }

    #[test]
    fn wilcoxon_p_never_zero() {
        let delta: Vec<f64> = (1..=5000).map(f64::from).collect();
        let p = wilcoxon_signed_rank(&delta).unwrap().p_value;
        assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn holm_examples() {
        assert_eq!(holm_adjust(&[0.01, 0.04]), vec![0.02, 0.04]);
        assert_eq!(holm_adjust(&[0.03, 0.04]), vec![0.06, 0.06]);
        assert_eq!(holm_adjust(&[0.6]), vec![0.6]);
        assert_eq!(holm_adjust(&[0.04, 0.01]), vec![0.04, 0.02]);
        assert_eq!(holm_adjust(&[0.5, 0.9]), vec![1.0, 1.0]);
        assert!(holm_adjust(&[]).is_empty());
    }

    #[test]
    fn cohens_d_examples() {
        assert_eq!(cohens_d_paired(&[0.1, 0.1, 0.1]).unwrap().d, None);
        let e = cohens_d_paired(&[0.0, 2.0]).unwrap();
        assert!(close(e.d.unwrap(), 0.5f64.sqrt(), 1e-15));
        assert_eq!(e.category, Some(EffectCategory::Medium));
        let delta = [-0.01, 0.01, 0.02, -0.02, 0.001];
        // mean 0.0002; sd = sqrt(Σ(x-m)²/4).
        let m = 0.001 / 5.0;
        let sd = (delta.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0).sqrt();
        let e = cohens_d_paired(&delta).unwrap();
        assert!(close(e.d.unwrap(), m / sd, 1e-15));
        assert_eq!(e.category, Some(EffectCategory::Negligible));
        assert!(cohens_d_paired(&[1.0]).is_err());
    }

    #[test]
    fn effect_category_cutoffs() {
        assert_eq!(EffectCategory::from_magnitude(0.19), EffectCategory::Negligible);
        assert_eq!(EffectCategory::from_magnitude(-0.2), EffectCategory::Small);
        assert_eq!(EffectCategory::from_magnitude(0.5), EffectCategory::Medium);
        assert_eq!(EffectCategory::from_magnitude(-0.8), EffectCategory::Large);
    }

    #[test]
    fn ecdf_examples() {
        let e = ecdf_winsorized(&[-3.0, 0.0, 3.0], 2.0).unwrap();
        assert_eq!(e.points, vec![(-2.0, 1.0 / 3.0), (0.0, 2.0 / 3.0), (2.0, 1.0)]);
        assert_eq!(e.fraction_positive, 1.0 / 3.0);
        let e = ecdf_winsorized(&[0.5], 2.0).unwrap();
        assert_eq!(e.points, vec![(0.5, 1.0)]);
        assert_eq!(e.fraction_positive, 1.0);
        let e = ecdf_winsorized(&[1.0, 1.0, -1.0], 2.0).unwrap();
        assert_eq!(e.points, vec![(-1.0, 1.0 / 3.0), (1.0, 1.0)]);
        assert!(ecdf_winsorized(&[], 2.0).is_err());
    }

    #[test]
    fn ecdf_symmetric_fraction() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let delta: Vec<f64> = (0..10_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = ecdf_winsorized(&delta, 2.0).unwrap().fraction_positive;
        assert!((f - 0.5).abs() <= 0.02);
    }

    fn arm(entries: &[(&str, Option<f64>)]) -> ArmOutcomes {
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn coverage_examples() {
        let ids: Vec<String> = (0..15).map(|i| format!("r{i:02}")).collect();
        let bounded: ArmOutcomes = ids.iter().enumerate().map(|(i, id)| (id.clone(), (i != 14).then_some(0.5))).collect();
        let unbounded: ArmOutcomes = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), (i < 13).then_some(0.5)))
            .collect();
        let c = coverage_summary(&bounded, &unbounded, 15);
        assert_eq!((c.finite_bounded, c.finite_unbounded, c.k()), (14, 13, 13));
        assert!(close(c.coverage_bounded, 14.0 / 15.0, 1e-15));
        assert!(close(c.coverage_unbounded, 13.0 / 15.0, 1e-15));
        assert_eq!(c.coverage_matched, c.coverage_unbounded);

        let all = arm(&[("a", Some(0.1)), ("b", Some(0.2))]);
        let c = coverage_summary(&all, &all, 2);
        assert_eq!((c.coverage_bounded, c.coverage_unbounded, c.coverage_matched), (1.0, 1.0, 1.0));

        let b = arm(&[("a", Some(0.1)), ("b", None)]);
        let u = arm(&[("a", None), ("b", Some(0.2))]);
        assert_eq!(coverage_summary(&b, &u, 2).k(), 0);
    }

    #[test]
    fn summary_over_matched_pairs() {
        let b = arm(&[("a", Some(0.9)), ("b", Some(0.8)), ("c", Some(0.7)), ("d", None)]);
        let u = arm(&[("a", Some(1.5)), ("b", Some(0.5)), ("c", None), ("d", Some(0.1))]);
        let ideals: BTreeMap<String, f64> = ["a", "b", "c", "d"].iter().map(|k| (k.to_string(), 1.0)).collect();
        let key = GroupKey {
            family: "exp:a=free".into(),
            lambda_set: "1,2,3".into(),
            backend: "mild".into(),
            width: "-".into(),
        };
        let s = summarize_pairs(key, &b, &u, &ideals, 4);
        assert_eq!(s.k, 2);
        assert!(close(s.delta[0], 0.4, 1e-15) && close(s.delta[1], 0.3, 1e-15));
        assert_eq!((s.excluded_bounded, s.excluded_unbounded), (1, 1));
        assert!(close(s.mae_bounded.unwrap().mean, 0.15, 1e-15));
        assert!(s.coverage_matched <= s.coverage_bounded.min(s.coverage_unbounded));
        assert_eq!(s.wilcoxon_p(), Some(0.5));
    }

    #[test]
    fn holm_across_groups() {
        let key = |f: &str| GroupKey {
            family: f.into(),
            lambda_set: String::new(),
            backend: String::new(),
            width: String::new(),
        };
        let b = arm(&[("a", Some(0.9)), ("b", Some(0.8))]);
        let u = arm(&[("a", Some(1.5)), ("b", Some(0.5))]);
        let none = arm(&[("a", None)]);
        let ideals: BTreeMap<String, f64> = [("a".to_string(), 1.0), ("b".to_string(), 1.0)].into();
        let mut s = vec![
            summarize_pairs(key("x"), &b, &u, &ideals, 2),
            summarize_pairs(key("y"), &none, &none, &ideals, 2),
            summarize_pairs(key("z"), &b, &u, &ideals, 2),
        ];
        apply_holm(&mut s);
        assert_eq!(s[0].holm_p, Some(1.0));
        assert_eq!(s[1].holm_p, None);
        assert_eq!(s[2].holm_p, Some(1.0));
    }
}
