//! Total ordinal ranking from a batched oracle (strand-sort variant).
//!
//! The oracle sees at most `q` URLs per query. The first batch seeds the
//! sorted list with all but its lowest answer, which becomes the overlap
//! element. Every later batch re-queries the overlap together with `q - 1`
//! fresh URLs; whatever outranks the old overlap is merged into the sorted
//! list by walking it in windows of `q - 1`, and whatever falls between the
//! old and new overlap is appended, since it already sits below everything
//! sorted so far. When the input runs dry the overlap goes last.
//!
//! Pending items are merged in answer order, so each one resumes the walk
//! where the previous one was placed instead of starting from the top.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::item::{is_absolute_url, Item, Ranking};
use crate::oracle::{BatchResult, OracleError, RankingOracle};

/// URLs per query when nothing else is configured; a five-clause OR query
/// fits the tightest term limit among the shipped dialects.
pub const DEFAULT_BATCH_SIZE: usize = 5;

/// One issued batch and its answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub seq: usize,
    pub engine: String,
    pub urls_in_query_order: Vec<String>,
    pub answer_order: Vec<String>,
    pub unindexed: Vec<String>,
    pub timestamp: DateTime<Utc>,
}

impl QueryRecord {
    /// Same record with the timestamp zeroed, for comparisons across runs.
    pub fn without_timestamp(&self) -> Self {
        Self {
            timestamp: DateTime::<Utc>::UNIX_EPOCH,
            ..self.clone()
        }
    }
}

pub fn write_query_log<W: Write>(log: &[QueryRecord], mut w: W) -> std::io::Result<()> {
    for rec in log {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_query_log<R: BufRead>(r: R) -> Result<Vec<QueryRecord>, String> {
    let mut log = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        log.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(log)
}

/// Working state of one ranking run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingState {
    /// URLs not yet queried, in input order.
    pub unsorted: VecDeque<String>,
    /// URLs ranked so far, best first. Every item here outranks `overlap`.
    pub sorted: Vec<String>,
    /// Lowest answer of the latest main batch; re-queried with the next one.
    pub overlap: Option<String>,
    /// Maximum URLs per query.
    pub q: usize,
    pub query_log: Vec<QueryRecord>,
    /// URLs the oracle left out of their first batch.
    pub unranked: Vec<String>,
    /// Ordered pairs `(better, worse)` stated directly by some answer.
    observed: HashSet<(String, String)>,
}

#[derive(Debug, Error)]
pub enum RankError {
    #[error("no items to rank")]
    Empty,
    #[error("duplicate item id {0}")]
    DuplicateId(String),
    #[error("duplicate url {0}")]
    DuplicateUrl(String),
    #[error("item {id} has an invalid url: {url:?}")]
    InvalidUrl { id: String, url: String },
    #[error("batch size must be at least 2, got {0}")]
    BatchSize(usize),
    #[error("OracleUnavailable after {} queries: {source}", state.query_log.len())]
    OracleUnavailable {
        source: OracleError,
        state: Box<RankingState>,
    },
    #[error("oracle failed after {} queries: {source}", state.query_log.len())]
    Oracle {
        source: OracleError,
        state: Box<RankingState>,
    },
    #[error("InconsistentOracle: {detail}")]
    InconsistentOracle {
        detail: String,
        state: Box<RankingState>,
    },
}

impl RankError {
    /// Partial state at the time the run aborted, when there is one.
    pub fn partial_state(&self) -> Option<&RankingState> {
        match self {
            RankError::OracleUnavailable { state, .. }
            | RankError::Oracle { state, .. }
            | RankError::InconsistentOracle { state, .. } => Some(state),
            _ => None,
        }
    }
}

/// Failure inside a run, before the state snapshot is attached.
enum Failure {
    Oracle(OracleError),
    Inconsistent(String),
}

impl Failure {
    fn attach(self, state: &RankingState) -> RankError {
        let state = Box::new(state.clone());
        match self {
            Failure::Oracle(source) if source.is_unavailable() => {
                RankError::OracleUnavailable { source, state }
            }
            Failure::Oracle(source) => RankError::Oracle { source, state },
            Failure::Inconsistent(detail) => RankError::InconsistentOracle { detail, state },
        }
    }
}

impl RankingState {
    pub fn new(urls: impl IntoIterator<Item = String>, q: usize) -> Self {
        Self {
            unsorted: urls.into_iter().collect(),
            sorted: Vec::new(),
            overlap: None,
            q,
            query_log: Vec::new(),
            unranked: Vec::new(),
            observed: HashSet::new(),
        }
    }

    /// Issues one batch, logs it and checks it against every earlier answer.
    fn ask<O: RankingOracle + ?Sized>(
        &mut self,
        oracle: &mut O,
        batch: Vec<String>,
    ) -> Result<BatchResult, Failure> {
        debug_assert!(!batch.is_empty() && batch.len() <= self.q);
        let raw = oracle.rank(&batch).map_err(Failure::Oracle)?;
        let mut result =
            BatchResult::from_answer(&batch, raw.ordered_urls).map_err(Failure::Oracle)?;
        result.raw = raw.raw;
        result.timestamp = raw.timestamp;
        self.query_log.push(QueryRecord {
            seq: self.query_log.len() + 1,
            engine: oracle.engine().to_string(),
            urls_in_query_order: batch,
            answer_order: result.ordered_urls.clone(),
            unindexed: result.unindexed.clone(),
            timestamp: result.timestamp.unwrap_or_else(Utc::now),
        });
        let answer = &result.ordered_urls;
        for (i, better) in answer.iter().enumerate() {
            for worse in &answer[i + 1..] {
                if self.observed.contains(&(worse.clone(), better.clone())) {
                    return Err(Failure::Inconsistent(format!(
                        "query {} ranks {better} above {worse}, an earlier answer said the opposite",
                        self.query_log.len()
                    )));
                }
                self.observed.insert((better.clone(), worse.clone()));
            }
        }
        Ok(result)
    }

    fn require_indexed(&self, result: &BatchResult, known: &[String]) -> Result<(), Failure> {
        match known.iter().find(|u| result.unindexed.contains(u)) {
            Some(u) => Err(Failure::Inconsistent(format!(
                "query {} dropped {u}, which an earlier answer ranked",
                self.query_log.len()
            ))),
            None => Ok(()),
        }
    }

    fn step<O: RankingOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<bool, Failure> {
        let Some(old) = self.overlap.clone() else {
            if self.unsorted.is_empty() {
                return Ok(false);
            }
            let take = self.q.min(self.unsorted.len());
            let batch: Vec<String> = self.unsorted.drain(..take).collect();
            let result = self.ask(oracle, batch)?;
            self.unranked.extend(result.unindexed);
            let mut answer = result.ordered_urls;
            if let Some(last) = answer.pop() {
                self.sorted.extend(answer);
                self.overlap = Some(last);
            }
            return Ok(true);
        };
        if self.unsorted.is_empty() {
            self.sorted.push(old);
            self.overlap = None;
            return Ok(false);
        }
        let take = (self.q - 1).min(self.unsorted.len());
        let mut batch = Vec::with_capacity(take + 1);
        batch.push(old.clone());
        batch.extend(self.unsorted.drain(..take));
        let result = self.ask(oracle, batch)?;
        self.require_indexed(&result, std::slice::from_ref(&old))?;
        self.unranked.extend(result.unindexed);
        let mut answer = result.ordered_urls;
        let new_overlap = answer.pop().expect("old overlap is in the answer");
        // `answer` now holds everything above the new overlap; split it at the
        // old overlap into items to merge and items known to be below `sorted`.
        let split = answer.iter().position(|u| *u == old).unwrap_or(answer.len());
        let below = answer.split_off(split);
        self.merge(oracle, &answer)?;
        self.sorted.extend(below);
        self.overlap = Some(new_overlap);
        Ok(true)
    }

    /// Inserts `pending` (in answer order, best first) into `sorted`.
    fn merge<O: RankingOracle + ?Sized>(
        &mut self,
        oracle: &mut O,
        pending: &[String],
    ) -> Result<(), Failure> {
        if pending.is_empty() {
            return Ok(());
        }
        let mut remaining: VecDeque<String> = std::mem::take(&mut self.sorted).into();
        let mut placed: Vec<String> = Vec::with_capacity(remaining.len() + pending.len());
        for item in pending {
            loop {
                if remaining.is_empty() {
                    placed.push(item.clone());
                    break;
                }
                let take = (self.q - 1).min(remaining.len());
                let mut batch = Vec::with_capacity(take + 1);
                batch.push(item.clone());
                batch.extend(remaining.drain(..take));
                let asked = self
                    .ask(oracle, batch.clone())
                    .and_then(|r| self.require_indexed(&r, &batch).map(|_| r));
                let result = match asked {
                    Ok(r) => r,
                    Err(e) => {
                        // restore a coherent list for the partial-state report
                        self.sorted = placed
                            .into_iter()
                            .chain(batch.into_iter().skip(1))
                            .chain(remaining)
                            .collect();
                        return Err(e);
                    }
                };
                let mut answer = result.ordered_urls;
                let pos = answer.iter().position(|u| u == item).expect("item is indexed");
                if pos + 1 == answer.len() {
                    answer.pop();
                    placed.extend(answer);
                    continue;
                }
                let after = answer.split_off(pos + 1);
                placed.extend(answer);
                for u in after.into_iter().rev() {
                    remaining.push_front(u);
                }
                break;
            }
        }
        placed.extend(remaining);
        self.sorted = placed;
        Ok(())
    }

    /// Checks the final order against every logged answer.
    fn check_final(&self) -> Result<(), Failure> {
        let pos: HashMap<&str, usize> = self
            .sorted
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect();
        for rec in &self.query_log {
            for w in rec.answer_order.windows(2) {
                match (pos.get(w[0].as_str()), pos.get(w[1].as_str())) {
                    (Some(a), Some(b)) if a < b => {}
                    _ => {
                        return Err(Failure::Inconsistent(format!(
                            "final order contradicts query {}: {} above {}",
                            rec.seq, w[0], w[1]
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    fn run<O: RankingOracle + ?Sized>(&mut self, oracle: &mut O) -> Result<(), Failure> {
        while self.step(oracle)? {}
        self.check_final()
    }
}

/// Number of oracle batches issued so far.
pub fn query_count(state: &RankingState) -> usize {
    state.query_log.len()
}

/// Result of a completed ranking run.
#[derive(Debug, Clone)]
pub struct RankOutcome {
    pub ranking: Ranking,
    pub state: RankingState,
}

/// Ranks `items` by asking `oracle` about at most `q` URLs at a time.
///
/// The oracle must answer consistently with one fixed order over the URLs it
/// indexes; answers that contradict each other abort the run. Items the
/// oracle never ranks end up in `Ranking::unranked`.
pub fn ordinal_rank<O: RankingOracle + ?Sized>(
    items: &[Item],
    oracle: &mut O,
    q: usize,
) -> Result<RankOutcome, RankError> {
    if items.is_empty() {
        return Err(RankError::Empty);
    }
    if q < 2 {
        return Err(RankError::BatchSize(q));
    }
    let mut id_of: HashMap<&str, &str> = HashMap::with_capacity(items.len());
    let mut ids = HashSet::with_capacity(items.len());
    for item in items {
        if !ids.insert(item.id.as_str()) {
            return Err(RankError::DuplicateId(item.id.clone()));
        }
        if !is_absolute_url(&item.url) {
            return Err(RankError::InvalidUrl {
                id: item.id.clone(),
                url: item.url.clone(),
            });
        }
        if id_of.insert(item.url.as_str(), item.id.as_str()).is_some() {
            return Err(RankError::DuplicateUrl(item.url.clone()));
        }
    }
    let mut state = RankingState::new(items.iter().map(|i| i.url.clone()), q);
    if let Err(f) = state.run(oracle) {
        return Err(f.attach(&state));
    }
    let to_ids = |urls: &[String]| -> Vec<String> {
        urls.iter().map(|u| id_of[u.as_str()].to_string()).collect()
    };
    let ranking = Ranking {
        source: oracle.engine().to_string(),
        items: to_ids(&state.sorted),
        unranked: to_ids(&state.unranked),
    };
    Ok(RankOutcome { ranking, state })
}

/// Merges `pending` (items that outranked the overlap, in answer order) into
/// the state's sorted list, querying one pending item with `q - 1` sorted
/// items at a time.
pub fn merge_into_sorted<O: RankingOracle + ?Sized>(
    pending: &[String],
    mut state: RankingState,
    oracle: &mut O,
) -> Result<RankingState, RankError> {
    if state.q < 2 {
        return Err(RankError::BatchSize(state.q));
    }
    match state.merge(oracle, pending) {
        Ok(()) => Ok(state),
        Err(f) => Err(f.attach(&state)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommutativityMismatch {
    pub first_query: Vec<String>,
    pub first_answer: Vec<String>,
    pub second_query: Vec<String>,
    pub second_answer: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CommutativityReport {
    pub batches_tested: usize,
    pub mismatches: Vec<CommutativityMismatch>,
}

/// Issues `trials` random batches twice, in two different URL orders, and
/// reports every batch whose answers differ.
pub fn verify_commutativity<O: RankingOracle + ?Sized>(
    urls: &[String],
    oracle: &mut O,
    batch_size: usize,
    trials: usize,
    seed: u64,
) -> Result<CommutativityReport, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = batch_size.min(urls.len());
    let mut mismatches = Vec::new();
    for _ in 0..trials {
        let mut first: Vec<String> = index::sample(&mut rng, urls.len(), k)
            .into_iter()
            .map(|i| urls[i].clone())
            .collect();
        first.shuffle(&mut rng);
        let mut second = first.clone();
        if k > 1 {
            while second == first {
                second.shuffle(&mut rng);
            }
        }
        let a = oracle.rank(&first)?;
        let b = oracle.rank(&second)?;
        let same_unindexed = {
            let x: HashSet<&String> = a.unindexed.iter().collect();
            let y: HashSet<&String> = b.unindexed.iter().collect();
            x == y
        };
        if a.ordered_urls != b.ordered_urls || !same_unindexed {
            mismatches.push(CommutativityMismatch {
                first_query: first,
                first_answer: a.ordered_urls,
                second_query: second,
                second_answer: b.ordered_urls,
            });
        }
    }
    Ok(CommutativityReport {
        batches_tested: trials,
        mismatches,
    })
}
