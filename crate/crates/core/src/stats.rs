//! Kendall's tau between strict rankings, its two-sided significance, and
//! the weak/moderate/strong classification used to mark table cells.
//!
//! With `N = n(n-1)/2` pairs, `C` concordant and `D` discordant pairs, the
//! concordance statistic is `T = C - D = N - 2D` and `tau = T / N`. Under the
//! null of independent rankings `D` is distributed as the inversion count of
//! a uniform random permutation, which gives the exact test. The normal
//! approximation uses `Var(T) = n(n-1)(2n+5)/18` and a continuity correction
//! of 1 on `|T|` (the step between attainable values of `T` is 2).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use libm::erfc;
use thiserror::Error;

use crate::item::Ranking;

/// Largest `n` the exact test accepts; `n!` still fits in a `u128`.
pub const MAX_EXACT_N: usize = 30;

/// Smallest `n` for which the normal approximation is offered.
pub const MIN_NORMAL_N: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("need at least {min} common items, got {n}")]
    TooFewItems { n: usize, min: usize },
    #[error("ties present in ranks")]
    TiesPresent,
    #[error("T = {t} has the wrong parity for n = {n}")]
    ParityViolation { t: i64, n: usize },
    #[error("|T| = {} exceeds n(n-1)/2 for n = {n}", t.abs())]
    StatisticOutOfRange { t: i64, n: usize },
    #[error("n = {n} is outside the range of this test")]
    NOutOfRange { n: usize },
}

/// `(rank_a, rank_b)` for every item ranked by both sides.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RankPairing {
    pub pairs: Vec<(usize, usize)>,
}

impl RankPairing {
    pub fn new(pairs: Vec<(usize, usize)>) -> Self {
        Self { pairs }
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    /// Pairs the ids ranked by both `a` and `b`; ids unranked on either side
    /// are dropped, which shrinks the effective `n`.
    pub fn from_rankings(a: &Ranking, b: &Ranking) -> Self {
        let rank_b: HashMap<&str, usize> = b
            .items
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i + 1))
            .collect();
        let pairs = a
            .items
            .iter()
            .enumerate()
            .filter_map(|(i, id)| rank_b.get(id.as_str()).map(|&rb| (i + 1, rb)))
            .collect();
        Self { pairs }
    }

    fn has_ties(&self) -> bool {
        let distinct = |mut v: Vec<usize>| {
            v.sort_unstable();
            v.windows(2).all(|w| w[0] != w[1])
        };
        !(distinct(self.pairs.iter().map(|p| p.0).collect())
            && distinct(self.pairs.iter().map(|p| p.1).collect()))
    }
}

pub fn pair_count(n: usize) -> i64 {
    (n * n.saturating_sub(1) / 2) as i64
}

/// Counts inversions with a merge sort.
fn count_inversions(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            inv += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    inv
}

/// `T = C - D` for a tie-free pairing.
pub fn concordance(pairing: &RankPairing) -> Result<i64, StatsError> {
    let n = pairing.n();
    if n < 2 {
        return Err(StatsError::TooFewItems { n, min: 2 });
    }
    if pairing.has_ties() {
        return Err(StatsError::TiesPresent);
    }
    let mut sorted = pairing.pairs.clone();
    sorted.sort_unstable_by_key(|p| p.0);
    let mut b: Vec<usize> = sorted.into_iter().map(|p| p.1).collect();
    let discordant = count_inversions(&mut b) as i64;
    Ok(pair_count(n) - 2 * discordant)
}

pub fn kendall_tau(pairing: &RankPairing) -> Result<f64, StatsError> {
    let t = concordance(pairing)?;
    Ok(t as f64 / pair_count(pairing.n()) as f64)
}

/// Number of permutations of `n` elements with exactly `k` inversions, for
/// `k = 0..=n(n-1)/2`. Built by adding one element at a time: inserting the
/// `m`-th element creates between `0` and `m - 1` new inversions.
pub fn inversion_distribution(n: usize) -> Vec<u128> {
    let mut counts = vec![1u128];
    for m in 2..=n {
        let mut next = vec![0u128; counts.len() + m - 1];
        // sliding window sum over the last m entries
        let mut window = 0u128;
        for (k, slot) in next.iter_mut().enumerate() {
            if k < counts.len() {
                window += counts[k];
            }
            if k >= m {
                window -= counts[k - m];
            }
            *slot = window;
        }
        counts = next;
    }
    counts
}

fn check_statistic(t: i64, n: usize) -> Result<i64, StatsError> {
    let total = pair_count(n);
    if t.abs() > total {
        return Err(StatsError::StatisticOutOfRange { t, n });
    }
    if (total - t).rem_euclid(2) != 0 {
        return Err(StatsError::ParityViolation { t, n });
    }
    Ok(total)
}

/// Exact two-sided p-value `P(|T'| >= |T|)` under the uniform-permutation
/// null, for `3 <= n <= 30`.
pub fn p_exact(t: i64, n: usize) -> Result<f64, StatsError> {
    if !(3..=MAX_EXACT_N).contains(&n) {
        return Err(StatsError::NOutOfRange { n });
    }
    let total = check_statistic(t, n)?;
    let counts = inversion_distribution(n);
    let all: u128 = counts.iter().sum();
    let extreme: u128 = counts
        .iter()
        .enumerate()
        .filter(|(k, _)| (total - 2 * *k as i64).abs() >= t.abs())
        .map(|(_, c)| *c)
        .sum();
    if extreme == all {
        return Ok(1.0);
    }
    Ok(extreme as f64 / all as f64)
}

/// Two-sided p-value from the normal approximation with continuity
/// correction, for `n >= 8`. `tau` is snapped to the nearest attainable `T`.
pub fn p_normal(tau: f64, n: usize) -> Result<f64, StatsError> {
    let t = (tau * pair_count(n) as f64).round() as i64;
    p_normal_statistic(t, n)
}

pub fn p_normal_statistic(t: i64, n: usize) -> Result<f64, StatsError> {
    if n < MIN_NORMAL_N {
        return Err(StatsError::NOutOfRange { n });
    }
    if t.abs() > pair_count(n) {
        return Err(StatsError::StatisticOutOfRange { t, n });
    }
    // erfc(z / sqrt 2) with z = (|T| - 1) / sd, folded into one square root
    // of an exact integer ratio: 2 Var(T) = n(n-1)(2n+5)/9.
    let two_var = (n * (n - 1) * (2 * n + 5)) as f64 / 9.0;
    let x = ((t.abs() - 1).max(0)) as f64 / two_var.sqrt();
    Ok(erfc(x).min(1.0))
}

/// Which test produced a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

/// How to choose between the exact and approximate tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMethod {
    Exact,
    NormalApprox,
    /// Exact below `exact_below`, normal approximation from there on.
    Auto { exact_below: usize },
}

impl Default for PValueMethod {
    /// Exact only where the normal approximation is not offered.
    fn default() -> Self {
        PValueMethod::Auto {
            exact_below: MIN_NORMAL_N,
        }
    }
}

impl PValueMethod {
    pub fn resolve(self, n: usize) -> TestMethod {
        match self {
            PValueMethod::Exact => TestMethod::Exact,
            PValueMethod::NormalApprox => TestMethod::NormalApprox,
            PValueMethod::Auto { exact_below } => {
                if n < exact_below {
                    TestMethod::Exact
                } else {
                    TestMethod::NormalApprox
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    None,
    SignificantWeak,
    SignificantModerate,
    SignificantStrong,
    /// Significant with `|tau|` above the strong band.
    SignificantVeryStrong,
}

impl Classification {
    /// Cells that tables mark: significant moderate or strong.
    pub fn is_marked(self) -> bool {
        matches!(
            self,
            Classification::SignificantModerate | Classification::SignificantStrong
        )
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::None => "none",
            Classification::SignificantWeak => "significant-weak",
            Classification::SignificantModerate => "significant-moderate",
            Classification::SignificantStrong => "significant-strong",
            Classification::SignificantVeryStrong => "significant-very-strong",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub alpha: f64,
    /// Moderate is `(moderate, strong]`.
    pub moderate: f64,
    /// Strong is `(strong, very_strong]`.
    pub strong: f64,
    pub very_strong: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            moderate: 0.40,
            strong: 0.60,
            very_strong: 0.80,
        }
    }
}

/// Classifies on `|tau|`, so a negative correlation can be moderate or strong.
pub fn classify(tau: f64, p: f64, th: &Thresholds) -> Classification {
    // NaN p is never significant
    if p.is_nan() || p >= th.alpha {
        return Classification::None;
    }
    let m = tau.abs();
    if m > th.very_strong {
        Classification::SignificantVeryStrong
    } else if m > th.strong {
        Classification::SignificantStrong
    } else if m > th.moderate {
        Classification::SignificantModerate
    } else {
        Classification::SignificantWeak
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub n: usize,
    pub tau: f64,
    pub statistic: i64,
    pub p_two_sided: f64,
    pub method: TestMethod,
    pub classification: Classification,
}

/// Tau, two-sided p and classification for one pairing (`n >= 3`).
pub fn correlate(
    pairing: &RankPairing,
    method: PValueMethod,
    th: &Thresholds,
) -> Result<CorrelationResult, StatsError> {
    let n = pairing.n();
    if n < 3 {
        return Err(StatsError::TooFewItems { n, min: 3 });
    }
    let t = concordance(pairing)?;
    let tau = t as f64 / pair_count(n) as f64;
    let mut used = method.resolve(n);
    if used == TestMethod::Exact && n > MAX_EXACT_N {
        used = TestMethod::NormalApprox;
    }
    if used == TestMethod::NormalApprox && n < MIN_NORMAL_N {
        used = TestMethod::Exact;
    }
    let p = match used {
        TestMethod::Exact => p_exact(t, n)?,
        TestMethod::NormalApprox => p_normal_statistic(t, n)?,
    };
    Ok(CorrelationResult {
        n,
        tau,
        statistic: t,
        p_two_sided: p,
        method: used,
        classification: classify(tau, p, th),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn perm_pairing(b: &[usize]) -> RankPairing {
        RankPairing::new(b.iter().enumerate().map(|(i, &r)| (i + 1, r)).collect())
    }

    #[test]
    fn identical_and_reversed() {
        for n in 2..15 {
            let id: Vec<usize> = (1..=n).collect();
            let rev: Vec<usize> = (1..=n).rev().collect();
            assert_eq!(kendall_tau(&perm_pairing(&id)).unwrap(), 1.0);
            assert_eq!(kendall_tau(&perm_pairing(&rev)).unwrap(), -1.0);
        }
    }

    #[test]
    fn eleven_discordant_pairs_of_ten() {
        // 10 ahead of nine smaller ranks, plus two adjacent swaps: 11 inversions
        let b = [10, 2, 1, 4, 3, 5, 6, 7, 8, 9];
        assert_eq!(concordance(&perm_pairing(&b)).unwrap(), 45 - 22);
        assert!((kendall_tau(&perm_pairing(&b)).unwrap() - 23.0 / 45.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(
            kendall_tau(&perm_pairing(&[1])),
            Err(StatsError::TooFewItems { n: 1, min: 2 })
        );
        assert_eq!(
            kendall_tau(&RankPairing::new(vec![(1, 1), (2, 1), (3, 2)])),
            Err(StatsError::TiesPresent)
        );
        assert_eq!(p_exact(0, 10), Err(StatsError::ParityViolation { t: 0, n: 10 }));
        assert_eq!(p_exact(1, 2), Err(StatsError::NOutOfRange { n: 2 }));
        assert_eq!(p_exact(1, 31), Err(StatsError::NOutOfRange { n: 31 }));
        assert_eq!(p_exact(47, 10), Err(StatsError::StatisticOutOfRange { t: 47, n: 10 }));
        assert_eq!(p_normal(0.1, 7), Err(StatsError::NOutOfRange { n: 7 }));
    }

    #[test]
    fn exact_small_cases() {
        assert_eq!(p_exact(-1, 10).unwrap(), 1.0);
        assert!((p_exact(3, 3).unwrap() - 2.0 / 6.0).abs() < 1e-15);
        assert_eq!(inversion_distribution(4), vec![1, 3, 5, 6, 5, 3, 1]);
    }

    #[test]
    fn normal_at_zero_is_one() {
        for n in [8, 9, 10, 25, 50, 100] {
            assert_eq!(p_normal(0.0, n).unwrap(), 1.0);
        }
        // odd pair count: T = ±1 is the closest to zero and also gives 1
        assert_eq!(p_normal(-1.0 / 45.0, 10).unwrap(), 1.0);
    }

    #[test]
    fn classification_bands() {
        let th = Thresholds::default();
        assert_eq!(classify(0.5111, 0.0490, &th), Classification::SignificantModerate);
        assert_eq!(classify(-0.5111, 0.04909, &th), Classification::SignificantModerate);
        assert_eq!(classify(0.6444, 0.0122, &th), Classification::SignificantStrong);
        assert_eq!(classify(0.3436, 0.0004, &th), Classification::SignificantWeak);
        assert_eq!(classify(0.9, 0.001, &th), Classification::SignificantVeryStrong);
        assert_eq!(classify(0.7, 0.05, &th), Classification::None);
        assert_eq!(classify(0.7, f64::NAN, &th), Classification::None);
        assert_eq!(classify(0.40, 0.01, &th), Classification::SignificantWeak);
        assert_eq!(classify(0.60, 0.01, &th), Classification::SignificantModerate);
        assert_eq!(classify(0.80, 0.01, &th), Classification::SignificantStrong);
    }

    #[test]
    fn method_resolution() {
        let auto = PValueMethod::default();
        assert_eq!(auto.resolve(7), TestMethod::Exact);
        assert_eq!(auto.resolve(8), TestMethod::NormalApprox);
        let exact30 = PValueMethod::Auto { exact_below: 31 };
        assert_eq!(exact30.resolve(30), TestMethod::Exact);
        assert_eq!(exact30.resolve(31), TestMethod::NormalApprox);
        let pairing = perm_pairing(&(1..=40).collect::<Vec<_>>());
        let r = correlate(&pairing, PValueMethod::Exact, &Thresholds::default()).unwrap();
        assert_eq!(r.method, TestMethod::NormalApprox);
    }

    #[test]
    fn from_rankings_drops_unranked() {
        let a = Ranking::new("a", vec!["x".into(), "y".into(), "z".into(), "w".into()]);
        let mut b = Ranking::new("b", vec!["w".into(), "y".into(), "x".into()]);
        b.unranked.push("z".into());
        let p = RankPairing::from_rankings(&a, &b);
        assert_eq!(p.n(), 3);
        assert_eq!(p.pairs, vec![(1, 3), (2, 2), (4, 1)]);
    }
}
