use std::sync::Arc;

use proptest::prelude::*;
use serank::oracle::{EngineClient, EngineDialect, QueryBudget};
use serank::ranking::RankError;
use serank::sim::{
    make_score_oracle, perturb, sweep, sweep_csv, HiddenScoreModel, NoiseKind, NoiseModel, PerQueryNoiseOracle,
    SimTransport,
};
use serank::{ordinal_rank, Item, Ranking, RankingOracle};

fn items(n: usize) -> Vec<Item> {
    (0..n)
        .map(|i| Item::new(format!("i{i:02}"), format!("I{i}"), format!("http://i{i:02}.org/")))
        .collect()
}

fn batch_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>)> {
    // (true order, batch indices, hidden indices) over 15 items
    (
        Just((0..15).collect::<Vec<_>>()).prop_shuffle(),
        prop::sample::subsequence((0..15).collect::<Vec<_>>(), 1..8).prop_shuffle(),
        prop::sample::subsequence((0..15).collect::<Vec<_>>(), 0..4),
    )
}

proptest! {
    /// Answers are the restriction of one fixed order to the indexed part of
    /// the batch, whatever order the batch arrives in.
    #[test]
    fn score_oracle_is_a_restriction((truth, batch, hidden) in batch_strategy()) {
        let its = items(15);
        let ids: Vec<&str> = truth.iter().map(|&i| its[i].id.as_str()).collect();
        let mut o = make_score_oracle("s", HiddenScoreModel::from_order(&ids), &its)
            .unwrap()
            .with_unindexed(hidden.iter().map(|&i| its[i].id.clone()));
        let urls: Vec<String> = batch.iter().map(|&i| its[i].url.clone()).collect();
        let got = o.rank(&urls).unwrap();
        let expected: Vec<String> = truth
            .iter()
            .filter(|i| batch.contains(i) && !hidden.contains(i))
            .map(|&i| its[i].url.clone())
            .collect();
        prop_assert_eq!(&got.ordered_urls, &expected);
        let mut rev = urls.clone();
        rev.reverse();
        prop_assert_eq!(o.rank(&rev).unwrap().ordered_urls, expected);
    }

    #[test]
    fn sim_transport_is_a_restriction((truth, batch, hidden) in batch_strategy(), host_only in any::<bool>()) {
        let its = items(15);
        let order: Vec<String> = truth.iter().map(|&i| its[i].url.clone()).collect();
        let hide: Vec<String> = hidden.iter().map(|&i| its[i].url.clone()).collect();
        let dialect = if host_only { EngineDialect::yahoo_2008() } else { EngineDialect::live_2008() };
        let mut client = EngineClient::new(
            dialect,
            Arc::new(QueryBudget::new("e", 100)),
            SimTransport::new(order).with_unindexed(hide),
        );
        let urls: Vec<String> = batch.iter().map(|&i| its[i].url.clone()).collect();
        let got = client.rank(&urls).unwrap();
        let expected: Vec<String> = truth
            .iter()
            .filter(|i| batch.contains(i) && !hidden.contains(i))
            .map(|&i| its[i].url.clone())
            .collect();
        prop_assert_eq!(got.ordered_urls, expected);
    }

    #[test]
    fn perturb_is_deterministic_and_a_permutation(n in 1usize..60, s in 0.0f64..30.0, seed in any::<u64>(), k in 0usize..3) {
        let kind = [NoiseKind::AdjacentSwap, NoiseKind::Dispersion, NoiseKind::Reversal][k];
        let truth = Ranking::new("t", (0..n).map(|i| format!("x{i}")).collect());
        let m = NoiseModel::new(kind, s, seed);
        let a = perturb(&truth, &m);
        prop_assert_eq!(&a, &perturb(&truth, &m));
        let mut sorted = a.items.clone();
        sorted.sort();
        let mut t = truth.items.clone();
        t.sort();
        prop_assert_eq!(sorted, t);
    }
}

#[test]
fn sim_oracles_rank_back_their_order() {
    let its = items(30);
    let truth = Ranking::new("t", its.iter().rev().map(|i| i.id.clone()).collect());
    let noisy = perturb(&truth, &NoiseModel::new(NoiseKind::AdjacentSwap, 10.0, 3));
    let mut o = make_score_oracle("s", HiddenScoreModel::from_order(&noisy.items), &its).unwrap();
    assert_eq!(ordinal_rank(&its, &mut o, 5).unwrap().ranking.items, noisy.items);
}

#[test]
fn zero_strength_is_identity_and_sweeps_are_reproducible() {
    let rows = sweep(&[10, 25], NoiseKind::Dispersion, &[0.0, 3.0], 50, 9);
    assert_eq!(rows, sweep(&[10, 25], NoiseKind::Dispersion, &[0.0, 3.0], 50, 9));
    assert_eq!(sweep_csv(&rows), sweep_csv(&rows.clone()));
    for r in rows.iter().filter(|r| r.strength == 0.0) {
        assert_eq!((r.mean_tau, r.sd_tau), (1.0, 0.0));
    }
    assert_ne!(rows, sweep(&[10, 25], NoiseKind::Dispersion, &[0.0, 3.0], 50, 10));
}

#[test]
fn mean_tau_falls_as_adjacent_swap_noise_grows() {
    let strengths = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    for n in [10, 25] {
        let rows = sweep(&[n], NoiseKind::AdjacentSwap, &strengths, 500, 2008);
        for w in rows.windows(2) {
            assert!(
                w[1].mean_tau < w[0].mean_tau,
                "n={n}: mean tau {} at strength {} not below {} at {}",
                w[1].mean_tau,
                w[1].strength,
                w[0].mean_tau,
                w[0].strength
            );
        }
        // a single adjacent swap always leaves exactly one discordant pair
        let one = &rows[1];
        let step = 2.0 / (n * (n - 1) / 2) as f64;
        assert!((one.mean_tau - (1.0 - step)).abs() < 1e-12, "{}", one.mean_tau);
    }
}

#[test]
fn per_query_noise_is_caught_as_inconsistent() {
    let its = items(20);
    let ids: Vec<&str> = its.iter().map(|i| i.id.as_str()).collect();
    let mut caught = 0;
    for seed in 0..20 {
        let inner = make_score_oracle("noisy", HiddenScoreModel::from_order(&ids), &its).unwrap();
        match ordinal_rank(&its, &mut PerQueryNoiseOracle::new(inner, 2, seed), 4) {
            Err(RankError::InconsistentOracle { state, .. }) => {
                assert!(!state.query_log.is_empty());
                caught += 1;
            }
            Ok(_) => {}
            Err(e) => panic!("{e}"),
        }
    }
    assert!(caught >= 15, "caught {caught}/20");
}
