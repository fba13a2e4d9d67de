//! Query execution against an engine transport, under dialect limits,
//! a daily quota and a retry policy.

use std::sync::Arc;
use std::time::Duration;

use log::{debug, warn};
use thiserror::Error;

use super::{build_query, BatchResult, EngineDialect, OracleError, QueryBudget, RankingOracle, SiteMode};
use crate::item::{host_of, split_host_path};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Worth retrying: timeouts, connection resets, 429, 5xx.
    #[error("transient transport error: {0}")]
    Transient(String),
    #[error("transport error: {0}")]
    Fatal(String),
    #[error("malformed engine response: {0}")]
    Malformed(String),
}

/// Sends a finished query string to an engine and returns the result URLs in
/// the engine's order.
pub trait Transport {
    fn fetch(&mut self, query: &str) -> Result<Vec<String>, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn fetch(&mut self, query: &str) -> Result<Vec<String>, TransportError> {
        (**self).fetch(query)
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn fetch(&mut self, query: &str) -> Result<Vec<String>, TransportError> {
        (**self).fetch(query)
    }
}

/// Waits between attempts after a transient failure. The default is three
/// retries after 1s, 2s and 4s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub delays: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            delays: vec![
                Duration::from_secs(1),
                Duration::from_secs(2),
                Duration::from_secs(4),
            ],
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { delays: Vec::new() }
    }

    /// Same number of retries, no waiting. For tests and stubs.
    pub fn immediate(retries: usize) -> Self {
        Self {
            delays: vec![Duration::ZERO; retries],
        }
    }
}

/// Runs one batch: builds and validates the query, reserves budget, calls the
/// transport (retrying transient failures) and maps result URLs back to the
/// queried URLs. Every transport call consumes one unit of budget, and the
/// budget is checked before any I/O.
pub fn execute<T: Transport + ?Sized>(
    urls: &[String],
    dialect: &EngineDialect,
    budget: &QueryBudget,
    transport: &mut T,
    retry: &RetryPolicy,
) -> Result<BatchResult, OracleError> {
    let query = build_query(urls, dialect)?;
    for url in dialect.unreliable_matches(urls) {
        warn!("{}: answers for {url} are known to be unreliable", dialect.name);
    }
    let mut attempt = 0;
    loop {
        budget.try_acquire()?;
        match transport.fetch(&query) {
            Ok(results) => {
                debug!("{}: {} results for {query}", dialect.name, results.len());
                let answer = match_results(urls, &results, dialect);
                return BatchResult::from_answer(urls, answer);
            }
            Err(TransportError::Transient(msg)) => {
                let Some(delay) = retry.delays.get(attempt) else {
                    return Err(OracleError::Unavailable(format!(
                        "{} after {} attempts: {msg}",
                        dialect.name,
                        attempt + 1
                    )));
                };
                warn!("{}: attempt {} failed ({msg}), retrying", dialect.name, attempt + 1);
                std::thread::sleep(*delay);
                attempt += 1;
            }
            Err(TransportError::Fatal(msg)) => {
                return Err(OracleError::Unavailable(format!("{}: {msg}", dialect.name)))
            }
            Err(TransportError::Malformed(msg)) => {
                return Err(OracleError::MalformedResponse(msg))
            }
        }
    }
}

fn strip_scheme(url: &str) -> String {
    let (authority, path) = split_host_path(url);
    format!("{}{}", authority.to_ascii_lowercase(), path)
}

/// Length of the match between a queried URL and a result URL, or `None`
/// when the result does not fall under the queried site.
fn match_len(queried: &str, result: &str, mode: SiteMode) -> Option<usize> {
    match mode {
        SiteMode::HostOnly => (host_of(queried) == host_of(result)).then_some(0),
        SiteMode::FullUrl => {
            let q = strip_scheme(queried);
            let r = strip_scheme(result);
            let prefix = q.trim_end_matches('/');
            let rest = r.strip_prefix(prefix)?;
            if rest.is_empty() || rest.starts_with(['/', '?', '#']) {
                Some(prefix.len())
            } else {
                None
            }
        }
    }
}

/// Orders queried URLs by the first engine result that falls under each of
/// them. A result is credited to the queried URL it matches most
/// specifically; queried URLs with no matching result are left out.
pub fn match_results(queried: &[String], results: &[String], dialect: &EngineDialect) -> Vec<String> {
    let mut placed = vec![false; queried.len()];
    let mut answer = Vec::new();
    for r in results {
        let best = queried
            .iter()
            .enumerate()
            .filter_map(|(i, q)| match_len(q, r, dialect.site_mode).map(|l| (l, i)))
            .max_by_key(|&(l, i)| (l, std::cmp::Reverse(i)));
        if let Some((_, i)) = best {
            if !placed[i] {
                placed[i] = true;
                answer.push(queried[i].clone());
            }
        }
    }
    answer
}

/// A live (or stubbed) engine as a ranking oracle.
pub struct EngineClient<T> {
    dialect: EngineDialect,
    budget: Arc<QueryBudget>,
    transport: T,
    retry: RetryPolicy,
}

impl<T: Transport> EngineClient<T> {
    pub fn new(dialect: EngineDialect, budget: Arc<QueryBudget>, transport: T) -> Self {
        Self {
            dialect,
            budget,
            transport,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn dialect(&self) -> &EngineDialect {
        &self.dialect
    }

    pub fn budget(&self) -> &Arc<QueryBudget> {
        &self.budget
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

impl<T: Transport> RankingOracle for EngineClient<T> {
    fn engine(&self) -> &str {
        &self.dialect.name
    }

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError> {
        execute(urls, &self.dialect, &self.budget, &mut self.transport, &self.retry)
    }
}
