//! Batched ranking oracles.
//!
//! An oracle receives up to `q` URLs and answers with the subset it indexes,
//! best first. Engines are reached through a [`Transport`] behind an
//! [`EngineClient`], which enforces the dialect's query limits and the daily
//! quota. Any oracle can be wrapped in a [`Recorder`] and later served
//! offline by a [`ReplayOracle`].

mod budget;
mod cache;
mod dialect;
mod engine;
mod http;

use std::collections::HashSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use budget::QueryBudget;
pub use cache::{
    cache_key, load_cache, CacheError, CacheRecord, Recorder, ReplayCache, ReplayOracle,
};
pub use dialect::{
    build_query, load_dialects, validate_query, DialectConfigError, EngineDialect, QueryError, QueryStats,
    QueryViolation, SiteMode,
};
pub use engine::{execute, match_results, EngineClient, RetryPolicy, Transport, TransportError};
pub use http::{extract_path, HttpConfig, HttpTransport};

/// One answer from an oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchResult {
    /// Queried URLs the oracle ranked, best first.
    pub ordered_urls: Vec<String>,
    /// Queried URLs absent from the answer.
    pub unindexed: Vec<String>,
    /// Verbatim response, kept for audit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    /// When the answer was obtained. Replayed answers carry the recorded time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

impl BatchResult {
    /// Builds a result from the queried batch and the oracle's ordered answer.
    /// Fails if the answer repeats a URL or names one that was not queried.
    pub fn from_answer(queried: &[String], answer: Vec<String>) -> Result<Self, OracleError> {
        let asked: HashSet<&str> = queried.iter().map(String::as_str).collect();
        let mut seen = HashSet::new();
        for url in &answer {
            if !asked.contains(url.as_str()) {
                return Err(OracleError::MalformedResponse(format!(
                    "answer contains unqueried url {url}"
                )));
            }
            if !seen.insert(url.as_str()) {
                return Err(OracleError::MalformedResponse(format!(
                    "answer repeats url {url}"
                )));
            }
        }
        let unindexed = queried
            .iter()
            .filter(|u| !seen.contains(u.as_str()))
            .cloned()
            .collect();
        Ok(Self {
            ordered_urls: answer,
            unindexed,
            raw: None,
            timestamp: None,
        })
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    /// Transient failure that outlived the retry policy.
    #[error("oracle unavailable: {0}")]
    Unavailable(String),
    #[error("QuotaExhausted: engine {engine} used its {quota} queries for today")]
    QuotaExhausted { engine: String, quota: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("no cached answer for {key}")]
    CacheMiss { key: String },
    #[error("unknown item: {0}")]
    UnknownItem(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl OracleError {
    pub fn is_unavailable(&self) -> bool {
        matches!(self, OracleError::Unavailable(_))
    }
}

/// A black box that ranks small batches of URLs.
pub trait RankingOracle {
    /// Engine identifier, used for logs and cache keys.
    fn engine(&self) -> &str;

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError>;
}

impl<O: RankingOracle + ?Sized> RankingOracle for &mut O {
    fn engine(&self) -> &str {
        (**self).engine()
    }

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError> {
        (**self).rank(urls)
    }
}

impl<O: RankingOracle + ?Sized> RankingOracle for Box<O> {
    fn engine(&self) -> &str {
        (**self).engine()
    }

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError> {
        (**self).rank(urls)
    }
}
