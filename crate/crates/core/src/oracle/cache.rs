//! Record/replay cache for oracle answers.
//!
//! One JSON-lines file per engine (`<dir>/<engine>.jsonl`), one object per
//! answered batch. Keys ignore URL order, since engines answer the same URL
//! set identically whatever order the clauses appear in.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{build_query, validate_query, BatchResult, EngineDialect, OracleError, RankingOracle};

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache not found: {0}")]
    NotFound(PathBuf),
    #[error("cache io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}: conflicting answers recorded for {key}")]
    Conflict { path: PathBuf, key: String },
    #[error("{0} is locked by another recording run")]
    Locked(PathBuf),
}

/// Order-insensitive key: engine name plus the lexicographically sorted URL set.
pub fn cache_key(urls: &[String], engine: &str) -> String {
    let mut sorted: Vec<&str> = urls.iter().map(String::as_str).collect();
    sorted.sort_unstable();
    sorted.dedup();
    format!("{engine}:{}", sorted.join(" "))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub engine: String,
    pub urls_sorted: Vec<String>,
    pub urls_query_order: Vec<String>,
    pub answer: Vec<String>,
    pub unindexed: Vec<String>,
    pub bytes: Option<usize>,
    pub terms: Option<usize>,
    pub timestamp: DateTime<Utc>,
}

pub(crate) fn cache_file(dir: &Path, engine: &str) -> PathBuf {
    dir.join(format!("{engine}.jsonl"))
}

/// In-memory view of one engine's recorded answers. Immutable once loaded,
/// so any number of readers can share it.
#[derive(Debug, Clone, Default)]
pub struct ReplayCache {
    engine: String,
    records: HashMap<String, CacheRecord>,
}

impl ReplayCache {
    pub fn engine(&self) -> &str {
        &self.engine
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&CacheRecord> {
        self.records.get(key)
    }
}

pub fn load_cache(dir: &Path, engine: &str) -> Result<ReplayCache, CacheError> {
    let path = cache_file(dir, engine);
    if !path.is_file() {
        return Err(CacheError::NotFound(path));
    }
    let file = File::open(&path).map_err(|source| CacheError::Io {
        path: path.clone(),
        source,
    })?;
    let mut records = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CacheError::Io {
            path: path.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| CacheError::Parse {
            path: path.clone(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        if let Some(prev) = records.get(&rec.key) {
            let prev: &CacheRecord = prev;
            if prev.answer != rec.answer {
                return Err(CacheError::Conflict {
                    path,
                    key: rec.key,
                });
            }
            continue;
        }
        records.insert(rec.key.clone(), rec);
    }
    Ok(ReplayCache {
        engine: engine.to_string(),
        records,
    })
}

/// Serves answers from a recorded cache. Never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayOracle {
    cache: Arc<ReplayCache>,
}

impl ReplayOracle {
    pub fn new(cache: Arc<ReplayCache>) -> Self {
        Self { cache }
    }

    pub fn open(dir: &Path, engine: &str) -> Result<Self, CacheError> {
        Ok(Self::new(Arc::new(load_cache(dir, engine)?)))
    }
}

impl RankingOracle for ReplayOracle {
    fn engine(&self) -> &str {
        self.cache.engine()
    }

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError> {
        let key = cache_key(urls, self.cache.engine());
        let rec = self
            .cache
            .get(&key)
            .ok_or_else(|| OracleError::CacheMiss { key: key.clone() })?;
        let mut result = BatchResult::from_answer(urls, rec.answer.clone())?;
        result.timestamp = Some(rec.timestamp);
        Ok(result)
    }
}

/// Wraps an oracle and appends every answer to the engine's cache file. The
/// file is locked exclusively for the recorder's lifetime.
pub struct Recorder<O> {
    inner: O,
    dialect: Option<EngineDialect>,
    path: PathBuf,
    writer: BufWriter<File>,
}

impl<O: RankingOracle> Recorder<O> {
    pub fn new(inner: O, dir: &Path, dialect: Option<EngineDialect>) -> Result<Self, CacheError> {
        std::fs::create_dir_all(dir).map_err(|source| CacheError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = cache_file(dir, inner.engine());
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| CacheError::Io {
                path: path.clone(),
                source,
            })?;
        if file.try_lock().is_err() {
            return Err(CacheError::Locked(path));
        }
        Ok(Self {
            inner,
            dialect,
            path,
            writer: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn into_inner(self) -> O {
        self.inner
    }

    fn write(&mut self, rec: &CacheRecord) -> Result<(), CacheError> {
        let io = |source| CacheError::Io {
            path: self.path.clone(),
            source,
        };
        let line = serde_json::to_string(rec).expect("cache record serializes");
        writeln!(self.writer, "{line}").map_err(io)?;
        self.writer.flush().map_err(|source| CacheError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

impl<O: RankingOracle> RankingOracle for Recorder<O> {
    fn engine(&self) -> &str {
        self.inner.engine()
    }

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError> {
        let mut result = self.inner.rank(urls)?;
        let timestamp = *result.timestamp.get_or_insert_with(Utc::now);
        let stats = self
            .dialect
            .as_ref()
            .and_then(|d| build_query(urls, d).ok().and_then(|q| validate_query(&q, d).ok()));
        let engine = self.inner.engine().to_string();
        let mut urls_sorted = urls.to_vec();
        urls_sorted.sort_unstable();
        let rec = CacheRecord {
            key: cache_key(urls, &engine),
            engine,
            urls_sorted,
            urls_query_order: urls.to_vec(),
            answer: result.ordered_urls.clone(),
            unindexed: result.unindexed.clone(),
            bytes: stats.map(|s| s.bytes),
            terms: stats.map(|s| s.terms),
            timestamp,
        };
        self.write(&rec)?;
        Ok(result)
    }
}
