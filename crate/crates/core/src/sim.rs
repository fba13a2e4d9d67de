//! Simulated engines: hidden-score oracles, fixed noisy orders, and a
//! per-query noisy oracle that exists to exercise inconsistency handling.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::item::{host_of, Item, Ranking};
use crate::oracle::{BatchResult, OracleError, RankingOracle, Transport, TransportError};
use crate::stats::{kendall_tau, RankPairing};

/// Latent quality score per item id. Higher is better; equal scores fall
/// back to lexicographic order on id, so the induced order is strict.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HiddenScoreModel {
    pub scores: BTreeMap<String, f64>,
}

impl HiddenScoreModel {
    pub fn new(scores: BTreeMap<String, f64>) -> Self {
        Self { scores }
    }

    /// Scores that reproduce `ids` (best first).
    pub fn from_order<S: AsRef<str>>(ids: &[S]) -> Self {
        let n = ids.len();
        Self {
            scores: ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_ref().to_string(), (n - i) as f64))
                .collect(),
        }
    }

    pub fn cmp_ids(&self, a: &str, b: &str) -> Ordering {
        let sa = self.scores.get(a).copied().unwrap_or(f64::NEG_INFINITY);
        let sb = self.scores.get(b).copied().unwrap_or(f64::NEG_INFINITY);
        sb.total_cmp(&sa).then_with(|| a.cmp(b))
    }

    /// All scored ids, best first.
    pub fn order(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.scores.keys().cloned().collect();
        ids.sort_by(|a, b| self.cmp_ids(a, b));
        ids
    }
}

/// Answers every batch by sorting it on hidden score. Consistent and
/// insensitive to URL order by construction.
#[derive(Debug, Clone)]
pub struct ScoreOracle {
    engine: String,
    model: HiddenScoreModel,
    id_of_url: HashMap<String, String>,
    hidden: HashSet<String>,
}

/// Builds a score oracle over `items`. Every item must be scored.
pub fn make_score_oracle(
    engine: impl Into<String>,
    model: HiddenScoreModel,
    items: &[Item],
) -> Result<ScoreOracle, OracleError> {
    if let Some(missing) = items.iter().find(|i| !model.scores.contains_key(&i.id)) {
        return Err(OracleError::UnknownItem(missing.id.clone()));
    }
    Ok(ScoreOracle {
        engine: engine.into(),
        model,
        id_of_url: items.iter().map(|i| (i.url.clone(), i.id.clone())).collect(),
        hidden: HashSet::new(),
    })
}

impl ScoreOracle {
    /// Marks item ids as not indexed; they never appear in answers.
    pub fn with_unindexed<I: IntoIterator<Item = S>, S: Into<String>>(mut self, ids: I) -> Self {
        self.hidden.extend(ids.into_iter().map(Into::into));
        self
    }

    pub fn model(&self) -> &HiddenScoreModel {
        &self.model
    }
}

impl RankingOracle for ScoreOracle {
    fn engine(&self) -> &str {
        &self.engine
    }

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError> {
        let mut scored = Vec::with_capacity(urls.len());
        for url in urls {
            let id = self
                .id_of_url
                .get(url)
                .ok_or_else(|| OracleError::UnknownItem(url.clone()))?;
            if !self.hidden.contains(id) {
                scored.push((id, url));
            }
        }
        scored.sort_by(|a, b| self.model.cmp_ids(a.0, b.0));
        BatchResult::from_answer(urls, scored.into_iter().map(|(_, u)| u.clone()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// `round(strength)` random adjacent transpositions.
    AdjacentSwap,
    /// A geometric number of random adjacent transpositions with mean `strength`.
    Dispersion,
    /// Full reversal for any positive strength.
    Reversal,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::AdjacentSwap => "adjacent-swap",
            NoiseKind::Dispersion => "dispersion",
            NoiseKind::Reversal => "reversal",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adjacent-swap" => Ok(NoiseKind::AdjacentSwap),
            "dispersion" => Ok(NoiseKind::Dispersion),
            "reversal" => Ok(NoiseKind::Reversal),
            other => Err(format!("unknown noise kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub strength: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, strength: f64, seed: u64) -> Self {
        Self {
            kind,
            strength,
            seed,
        }
    }

    fn swap_count<R: Rng>(&self, rng: &mut R) -> usize {
        let strength = self.strength.max(0.0);
        match self.kind {
            NoiseKind::AdjacentSwap => strength.round() as usize,
            NoiseKind::Dispersion if strength == 0.0 => 0,
            NoiseKind::Dispersion => Geometric::new(1.0 / (1.0 + strength))
                .expect("probability in (0, 1]")
                .sample(rng) as usize,
            NoiseKind::Reversal => 0,
        }
    }
}

fn adjacent_swaps<T, R: Rng>(v: &mut [T], count: usize, rng: &mut R) {
    if v.len() < 2 {
        return;
    }
    for _ in 0..count {
        let i = rng.random_range(0..v.len() - 1);
        v.swap(i, i + 1);
    }
}

/// Applies the noise once, giving a fixed perturbed order. Unranked ids are
/// carried over untouched.
pub fn perturb(order: &Ranking, noise: &NoiseModel) -> Ranking {
    let mut items = order.items.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    if noise.kind == NoiseKind::Reversal {
        if noise.strength > 0.0 {
            items.reverse();
        }
    } else {
        let count = noise.swap_count(&mut rng);
        adjacent_swaps(&mut items, count, &mut rng);
    }
    Ranking {
        source: order.source.clone(),
        items,
        unranked: order.unranked.clone(),
    }
}

/// Re-draws its noise on every query, so answers contradict one another.
/// Only useful for testing how ranking reacts to an inconsistent engine.
pub struct PerQueryNoiseOracle {
    inner: ScoreOracle,
    swaps: usize,
    rng: ChaCha8Rng,
}

impl PerQueryNoiseOracle {
    pub fn new(inner: ScoreOracle, swaps: usize, seed: u64) -> Self {
        Self {
            inner,
            swaps,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl RankingOracle for PerQueryNoiseOracle {
    fn engine(&self) -> &str {
        self.inner.engine()
    }

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError> {
        let mut r = self.inner.rank(urls)?;
        adjacent_swaps(&mut r.ordered_urls, self.swaps, &mut self.rng);
        Ok(r)
    }
}

/// Transport that plays a search engine over a fixed URL order. It reads the
/// `site:` clauses out of the query string; a clause without a scheme is
/// treated as a host filter and is ranked by the best URL on that host.
#[derive(Debug, Clone)]
pub struct SimTransport {
    order: Vec<String>,
    hidden: HashSet<String>,
    calls: usize,
}

impl SimTransport {
    /// `order` is the engine's private URL order, best first.
    pub fn new(order: Vec<String>) -> Self {
        Self {
            order,
            hidden: HashSet::new(),
            calls: 0,
        }
    }

    pub fn with_unindexed<I: IntoIterator<Item = String>>(mut self, urls: I) -> Self {
        self.hidden.extend(urls);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls
    }

    fn position_of(&self, target: &str) -> Option<(usize, String)> {
        let visible = self.order.iter().enumerate().filter(|(_, u)| !self.hidden.contains(*u));
        if target.contains("://") {
            visible
                .into_iter()
                .find(|(_, u)| *u == target)
                .map(|(i, u)| (i, u.clone()))
        } else {
            let host = host_of(target);
            visible
                .into_iter()
                .find(|(_, u)| host_of(u) == host)
                .map(|(i, _)| (i, format!("http://{host}/")))
        }
    }
}

impl Transport for SimTransport {
    fn fetch(&mut self, query: &str) -> Result<Vec<String>, TransportError> {
        self.calls += 1;
        let mut hits: Vec<(usize, String)> = query
            .split_whitespace()
            .filter_map(|tok| tok.strip_prefix("site:"))
            .filter_map(|target| self.position_of(target))
            .collect();
        hits.sort();
        hits.dedup();
        Ok(hits.into_iter().map(|(_, u)| u).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub noise_kind: NoiseKind,
    pub strength: f64,
    pub replicates: usize,
    pub mean_tau: f64,
    pub sd_tau: f64,
}

/// Mean and standard deviation of tau between a true order and its perturbed
/// copy, for every `(n, strength)` cell. Cell `i` (row-major over `n_values`
/// then `strengths`) draws from seed `base_seed + i`.
pub fn sweep(
    n_values: &[usize],
    kind: NoiseKind,
    strengths: &[f64],
    replicates: usize,
    base_seed: u64,
) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(n_values.len() * strengths.len());
    for (ni, &n) in n_values.iter().enumerate() {
        let truth = Ranking::new("expert", (0..n).map(|i| format!("item{i:03}")).collect());
        for (si, &strength) in strengths.iter().enumerate() {
            let cell = (ni * strengths.len() + si) as u64;
            let mut cell_rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(cell));
            let taus: Vec<f64> = (0..replicates)
                .map(|_| {
                    let noisy = perturb(&truth, &NoiseModel::new(kind, strength, cell_rng.next_u64()));
                    let pairing = RankPairing::from_rankings(&truth, &noisy);
                    kendall_tau(&pairing).expect("n >= 2 permutation pair")
                })
                .collect();
            let (mean_tau, sd_tau) = mean_sd(&taus);
            rows.push(SweepRow {
                n,
                noise_kind: kind,
                strength,
                replicates,
                mean_tau,
                sd_tau,
            });
        }
    }
    rows
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n,noise_kind,strength,replicates,mean_tau,sd_tau\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.noise_kind, r.strength, r.replicates, r.mean_tau, r.sd_tau
        ));
    }
    out
}
