//! Items (real-world entities mapped to URLs) and ordinal rankings over them.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UrlError {
    #[error("empty url")]
    Empty,
    #[error("not an absolute url: {0}")]
    NotAbsolute(String),
}

/// A labeled entity together with the single URL that stands for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub label: String,
    pub url: String,
}

impl Item {
    pub fn new(id: impl Into<String>, label: impl Into<String>, url: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            url: url.into(),
        }
    }
}

/// An ordinal total order over item ids. Only relative position carries
/// meaning; the gap between rank 1 and 2 says nothing about the gap between
/// rank 2 and 3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    /// Oracle or expert list that produced the order.
    pub source: String,
    /// Ranked ids, best first.
    pub items: Vec<String>,
    /// Ids the source could not place (e.g. URLs an engine does not index).
    #[serde(default)]
    pub unranked: Vec<String>,
}

impl Ranking {
    pub fn new(source: impl Into<String>, items: Vec<String>) -> Self {
        Self {
            source: source.into(),
            items,
            unranked: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// 1-based rank of `id`, or `None` when it is unranked or absent.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|x| x == id).map(|p| p + 1)
    }

    /// Ranked ids followed by unranked ids, the order used in emitted reports.
    pub fn report_order(&self) -> impl Iterator<Item = &String> {
        self.items.iter().chain(self.unranked.iter())
    }

    /// True when no id repeats across `items` and `unranked`.
    pub fn is_duplicate_free(&self) -> bool {
        let mut seen = HashSet::new();
        self.report_order().all(|id| seen.insert(id.as_str()))
    }

    /// Set of every id the ranking mentions.
    pub fn id_set(&self) -> BTreeSet<&str> {
        self.report_order().map(String::as_str).collect()
    }
}

/// Normalizes a URL: trims whitespace and lowercases scheme and host while
/// preserving path case.
pub fn normalize_url(raw: &str) -> Result<String, UrlError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(UrlError::Empty);
    }
    let Some((scheme, rest)) = trimmed.split_once("://") else {
        return Err(UrlError::NotAbsolute(trimmed.to_string()));
    };
    let (authority, path) = match rest.find(['/', '?', '#']) {
        Some(i) => rest.split_at(i),
        None => (rest, ""),
    };
    let normalized = format!(
        "{}://{}{}",
        scheme.to_ascii_lowercase(),
        authority.to_ascii_lowercase(),
        path
    );
    if !is_absolute_url(&normalized) {
        return Err(UrlError::NotAbsolute(trimmed.to_string()));
    }
    Ok(normalized)
}

pub fn is_absolute_url(s: &str) -> bool {
    match url::Url::parse(s) {
        Ok(u) => u.has_host(),
        Err(_) => false,
    }
}

/// Splits a URL into `(host, path)`, dropping the scheme. The path keeps its
/// leading slash; it is empty when the URL has none.
pub fn split_host_path(raw: &str) -> (&str, &str) {
    let rest = match raw.split_once("://") {
        Some((_, r)) => r,
        None => raw,
    };
    match rest.find(['/', '?', '#']) {
        Some(i) => rest.split_at(i),
        None => (rest, ""),
    }
}

/// Host part of a URL, lowercased and without port.
pub fn host_of(raw: &str) -> String {
    let (authority, _) = split_host_path(raw);
    let host = authority.rsplit('@').next().unwrap_or(authority);
    let host = match host.rsplit_once(':') {
        Some((h, port)) if port.chars().all(|c| c.is_ascii_digit()) => h,
        _ => host,
    };
    host.to_ascii_lowercase()
}
