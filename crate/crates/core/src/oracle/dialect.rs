//! Engine query dialects: `site:` clause construction and limit checks.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::item::split_host_path;

/// How an engine's `site:` operator accepts its argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteMode {
    /// The URL is passed verbatim, scheme and path included.
    FullUrl,
    /// Only `host/` is accepted; scheme and path are stripped.
    HostOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineDialect {
    pub name: String,
    pub site_mode: SiteMode,
    #[serde(default = "default_or_token")]
    pub or_token: String,
    pub max_query_bytes: usize,
    #[serde(default)]
    pub max_query_terms: Option<usize>,
    pub daily_quota: u32,
    /// Substrings of URLs whose answers from this engine are known to be
    /// unreliable. Matching URLs are reported with a warning, not altered.
    #[serde(default)]
    pub unreliable_url_patterns: Vec<String>,
}

fn default_or_token() -> String {
    "OR".to_string()
}

impl EngineDialect {
    pub fn google_2008() -> Self {
        Self {
            name: "google-2008".into(),
            site_mode: SiteMode::FullUrl,
            or_token: default_or_token(),
            max_query_bytes: 2048,
            max_query_terms: Some(10),
            daily_quota: 1000,
            unreliable_url_patterns: Vec::new(),
        }
    }

    pub fn yahoo_2008() -> Self {
        Self {
            name: "yahoo-2008".into(),
            site_mode: SiteMode::HostOnly,
            or_token: default_or_token(),
            max_query_bytes: 2048,
            max_query_terms: None,
            daily_quota: 5000,
            unreliable_url_patterns: Vec::new(),
        }
    }

    pub fn live_2008() -> Self {
        Self {
            name: "live-2008".into(),
            site_mode: SiteMode::FullUrl,
            or_token: default_or_token(),
            max_query_bytes: 2048,
            max_query_terms: None,
            daily_quota: 10_000,
            unreliable_url_patterns: vec!["wikipedia.org/wiki/".into()],
        }
    }

    pub fn builtins() -> Vec<Self> {
        vec![Self::google_2008(), Self::yahoo_2008(), Self::live_2008()]
    }

    pub fn builtin(name: &str) -> Option<Self> {
        Self::builtins().into_iter().find(|d| d.name == name)
    }

    pub fn check(&self) -> Result<(), String> {
        if self.name.trim().is_empty() {
            return Err("dialect name is empty".into());
        }
        if self.max_query_bytes == 0 {
            return Err(format!("{}: max_query_bytes must be positive", self.name));
        }
        if self.daily_quota == 0 {
            return Err(format!("{}: daily_quota must be positive", self.name));
        }
        if self.max_query_terms == Some(0) {
            return Err(format!("{}: max_query_terms must be positive", self.name));
        }
        if self.or_token.split_whitespace().count() != 1 {
            return Err(format!("{}: or_token must be a single word", self.name));
        }
        Ok(())
    }

    /// Largest number of URLs one query can carry under the term limit:
    /// `k` clauses joined by `k - 1` OR tokens use `2k - 1` terms.
    pub fn max_urls_per_query(&self) -> Option<usize> {
        self.max_query_terms.map(|t| t.div_ceil(2))
    }

    pub fn unreliable_matches<'a>(&self, urls: &'a [String]) -> Vec<&'a String> {
        urls.iter()
            .filter(|u| {
                self.unreliable_url_patterns
                    .iter()
                    .any(|p| !p.is_empty() && u.contains(p.as_str()))
            })
            .collect()
    }

    /// The `site:` argument for one URL.
    pub fn site_target(&self, url: &str) -> String {
        match self.site_mode {
            SiteMode::FullUrl => url.to_string(),
            SiteMode::HostOnly => {
                let (authority, _) = split_host_path(url);
                format!("{}/", authority.to_ascii_lowercase())
            }
        }
    }
}

/// Reasons a query string is rejected by a dialect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryViolation {
    Empty,
    TooManyBytes { bytes: usize, limit: usize },
    TooManyTerms { terms: usize, limit: usize },
}

impl fmt::Display for QueryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryViolation::Empty => write!(f, "query has zero terms"),
            QueryViolation::TooManyBytes { bytes, limit } => {
                write!(f, "query is {bytes} bytes, exceeding the byte limit of {limit}")
            }
            QueryViolation::TooManyTerms { terms, limit } => {
                write!(f, "query has {terms} terms, exceeding the term limit of {limit}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryStats {
    pub bytes: usize,
    pub terms: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("QueryTooLarge: {0}")]
    TooLarge(QueryViolation),
    #[error("HostOnlyCollision: {first} and {second} both reduce to site:{host}")]
    HostOnlyCollision {
        host: String,
        first: String,
        second: String,
    },
    #[error("no urls to query")]
    NoUrls,
}

/// Checks a raw query string against the dialect's limits.
///
/// Terms are whitespace-delimited tokens, so each `site:<url>` clause and each
/// OR token counts once. Bytes are measured on the raw (not URL-encoded)
/// string. Never panics; every input maps to stats or a violation.
pub fn validate_query(query: &str, dialect: &EngineDialect) -> Result<QueryStats, QueryViolation> {
    let stats = QueryStats {
        bytes: query.len(),
        terms: query.split_whitespace().count(),
    };
    if stats.terms == 0 {
        return Err(QueryViolation::Empty);
    }
    if stats.bytes > dialect.max_query_bytes {
        return Err(QueryViolation::TooManyBytes {
            bytes: stats.bytes,
            limit: dialect.max_query_bytes,
        });
    }
    if let Some(limit) = dialect.max_query_terms {
        if stats.terms > limit {
            return Err(QueryViolation::TooManyTerms {
                terms: stats.terms,
                limit,
            });
        }
    }
    Ok(stats)
}

/// Joins `site:` clauses with the dialect's OR token, preserving input order.
pub fn build_query(urls: &[String], dialect: &EngineDialect) -> Result<String, QueryError> {
    if urls.is_empty() {
        return Err(QueryError::NoUrls);
    }
    let mut seen: HashMap<String, &str> = HashMap::new();
    let mut clauses = Vec::with_capacity(urls.len());
    for url in urls {
        let target = dialect.site_target(url);
        if dialect.site_mode == SiteMode::HostOnly {
            if let Some(first) = seen.insert(target.clone(), url) {
                if first != url {
                    return Err(QueryError::HostOnlyCollision {
                        host: target,
                        first: first.to_string(),
                        second: url.clone(),
                    });
                }
            }
        }
        clauses.push(format!("site:{target}"));
    }
    let query = clauses.join(&format!(" {} ", dialect.or_token));
    validate_query(&query, dialect).map_err(QueryError::TooLarge)?;
    Ok(query)
}

#[derive(Debug, Error)]
pub enum DialectConfigError {
    #[error("reading dialect config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing dialect config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid dialect: {0}")]
    Invalid(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DialectFile {
    Many(Vec<EngineDialect>),
    One(EngineDialect),
}

/// Loads dialects from a JSON file holding one dialect object or an array.
pub fn load_dialects(path: &Path) -> Result<Vec<EngineDialect>, DialectConfigError> {
    let text = std::fs::read_to_string(path)?;
    let dialects = match serde_json::from_str(&text)? {
        DialectFile::Many(v) => v,
        DialectFile::One(d) => vec![d],
    };
    for d in &dialects {
        d.check().map_err(DialectConfigError::Invalid)?;
    }
    Ok(dialects)
}
