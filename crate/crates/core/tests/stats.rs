use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serank::stats::{
    classify, concordance, correlate, inversion_distribution, kendall_tau, p_exact, p_normal,
    p_normal_statistic, pair_count, Classification, PValueMethod, RankPairing, StatsError, TestMethod,
    Thresholds, MAX_EXACT_N, MIN_NORMAL_N,
};

/// O(n²) count of concordant minus discordant pairs.
fn brute_t(x: &[usize], y: &[usize]) -> i64 {
    let mut t = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let s = (x[i] as i64 - x[j] as i64).signum() * (y[i] as i64 - y[j] as i64).signum();
            t += s;
        }
    }
    t
}

fn pairing(x: &[usize], y: &[usize]) -> RankPairing {
    RankPairing::new(x.iter().copied().zip(y.iter().copied()).collect())
}

fn perm_pair() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            Just((1..=n).collect::<Vec<_>>()).prop_shuffle(),
            Just((1..=n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #[test]
    fn statistic_matches_brute_force((x, y) in perm_pair()) {
        let n = x.len();
        let p = pairing(&x, &y);
        let t = concordance(&p).unwrap();
        prop_assert_eq!(t, brute_t(&x, &y));
        let big_n = pair_count(n);
        // range, granularity and parity
        prop_assert!(t.abs() <= big_n);
        prop_assert_eq!((big_n - t) % 2, 0);
        let tau = kendall_tau(&p).unwrap();
        prop_assert!((-1.0..=1.0).contains(&tau));
        prop_assert!((tau * big_n as f64 - t as f64).abs() < 1e-9);
        // symmetry and negation
        prop_assert_eq!(kendall_tau(&pairing(&y, &x)).unwrap(), tau);
        let neg: Vec<usize> = y.iter().map(|r| n + 1 - r).collect();
        prop_assert_eq!(kendall_tau(&pairing(&x, &neg)).unwrap(), -tau);
        prop_assert_eq!(kendall_tau(&pairing(&x, &x)).unwrap(), 1.0);
    }

    #[test]
    fn p_values_are_probabilities((x, y) in perm_pair()) {
        let n = x.len();
        prop_assume!(n >= 3);
        let t = concordance(&pairing(&x, &y)).unwrap();
        if n <= MAX_EXACT_N {
            let p = p_exact(t, n).unwrap();
            prop_assert!(p > 0.0 && p <= 1.0);
            prop_assert_eq!(p, p_exact(-t, n).unwrap());
        }
        if n < MIN_NORMAL_N {
            let refused = matches!(p_normal_statistic(t, n), Err(StatsError::NOutOfRange { .. }));
            prop_assert!(refused);
        } else {
            let q = p_normal_statistic(t, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&q));
            prop_assert_eq!(q, p_normal_statistic(-t, n).unwrap());
        }
    }
}

#[test]
fn mahonian_rows_sum_to_n_factorial() {
    let mut fact: u128 = 1;
    for n in 1..=MAX_EXACT_N {
        fact *= n as u128;
        let d = inversion_distribution(n);
        assert_eq!(d.len() as i64, pair_count(n) + 1);
        assert_eq!(d.iter().sum::<u128>(), fact, "n={n}");
        // symmetric
        assert!(d.iter().eq(d.iter().rev()));
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n);
            out.push(q);
        }
    }
    out
}

#[test]
fn exact_p_matches_enumeration() {
    for n in 3..=8 {
        let id: Vec<usize> = (1..=n).collect();
        let ts: Vec<i64> = permutations(n).iter().map(|p| brute_t(&id, p)).collect();
        let total = ts.len() as f64;
        let big_n = pair_count(n);
        for t in (-big_n..=big_n).step_by(2) {
            let tail = ts.iter().filter(|s| s.abs() >= t.abs()).count() as f64 / total;
            let p = p_exact(t, n).unwrap();
            assert!((p - tail).abs() < 1e-12, "n={n} t={t}: {p} vs {tail}");
        }
    }
}

#[test]
fn normal_p_reference_values() {
    // erfc((|T|-1) / sqrt(2·var)), reference digits from an arbitrary-precision evaluation
    assert!((p_normal_statistic(23, 10).unwrap() - 0.049_098_1).abs() < 5e-7);
    assert!((p_normal_statistic(140, 25).unwrap() - 0.001_168_7).abs() < 5e-7);
    assert_eq!(p_normal_statistic(1, 10).unwrap(), 1.0);
    assert!((p_normal(23.0 / 45.0, 10).unwrap() - p_normal_statistic(23, 10).unwrap()).abs() < 1e-15);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(p_exact(2, 10), Err(StatsError::ParityViolation { .. })));
    assert!(matches!(p_exact(47, 10), Err(StatsError::StatisticOutOfRange { .. })));
    assert!(matches!(p_exact(1, 31), Err(StatsError::NOutOfRange { .. })));
    assert!(matches!(
        concordance(&RankPairing::new(vec![(1, 1)])),
        Err(StatsError::TooFewItems { .. })
    ));
    assert!(matches!(
        concordance(&RankPairing::new(vec![(1, 1), (1, 2)])),
        Err(StatsError::TiesPresent)
    ));
}

#[test]
fn null_calibration_at_n_10() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut y: Vec<usize> = (1..=10).collect();
    let x = y.clone();
    let trials = 100_000;
    let mut rejected = 0;
    for _ in 0..trials {
        y.shuffle(&mut rng);
        let t = concordance(&pairing(&x, &y)).unwrap();
        if p_exact(t, 10).unwrap() < 0.05 {
            rejected += 1;
        }
    }
    let frac = rejected as f64 / trials as f64;
    assert!((0.035..=0.065).contains(&frac), "{frac}");
}

/// Largest |p_exact - p_normal| over every attainable statistic.
fn max_gap(n: usize) -> f64 {
    let big_n = pair_count(n);
    (-big_n..=big_n)
        .step_by(2)
        .map(|t| (p_exact(t, n).unwrap() - p_normal_statistic(t, n).unwrap()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn exact_and_normal_agree_from_eleven_up() {
    for n in 11..=MAX_EXACT_N {
        assert!(max_gap(n) <= 0.01, "n={n}: {}", max_gap(n));
    }
}

#[test]
fn small_n_gaps_are_as_measured() {
    for (n, gap) in [(8, 0.012_28), (9, 0.011_20), (10, 0.010_04)] {
        assert!((max_gap(n) - gap).abs() < 5e-5, "n={n}: {}", max_gap(n));
    }
}

#[test]
fn method_resolution_and_fallbacks() {
    let auto = PValueMethod::default();
    assert_eq!(auto.resolve(7), TestMethod::Exact);
    assert_eq!(auto.resolve(8), TestMethod::NormalApprox);
    let th = Thresholds::default();
    let big = RankPairing::new((1..=40).map(|i| (i, i)).collect());
    assert_eq!(correlate(&big, PValueMethod::Exact, &th).unwrap().method, TestMethod::NormalApprox);
    let small = RankPairing::new(vec![(1, 1), (2, 2), (3, 3), (4, 4)]);
    let r = correlate(&small, PValueMethod::NormalApprox, &th).unwrap();
    assert_eq!(r.method, TestMethod::Exact);
    assert_eq!(r.p_two_sided, 2.0 / 24.0);
}

#[test]
fn classification_bands() {
    let th = Thresholds::default();
    assert_eq!(classify(0.5, 0.2, &th), Classification::None);
    assert_eq!(classify(0.3, 0.01, &th), Classification::SignificantWeak);
    assert_eq!(classify(-0.5, 0.01, &th), Classification::SignificantModerate);
    assert_eq!(classify(0.7, 0.01, &th), Classification::SignificantStrong);
    assert_eq!(classify(0.9, 0.01, &th), Classification::SignificantVeryStrong);
    assert_eq!(classify(0.5, f64::NAN, &th), Classification::None);
    assert!(classify(0.8, 0.01, &th).is_marked());
    assert!(!classify(0.4, 0.01, &th).is_marked());
}
