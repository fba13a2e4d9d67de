//! Expert lists: loading, deduplication and truncation.
//!
//! CSV is the interchange format (header `rank,label,url`, extra columns
//! ignored); JSON may be either a bare array of `{rank, label, url}` objects
//! or a full [`ExpertList`] object. Ranks in the file may have gaps; on load
//! they are renumbered `1..n` and the file's value is kept as `source_rank`,
//! which is what truncation windows refer to.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::item::{normalize_url, Item, Ranking, UrlError};

/// Where in an input file a problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// 1-based physical line of a CSV file.
    Line(usize),
    /// 1-based position in a JSON entry array.
    Entry(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Entry(n) => write!(f, "entry {n}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("ParseError at {at}: {msg}")]
    Parse { at: Location, msg: String },
    #[error("DuplicateRank at {at}: rank {rank} already used at {first}")]
    DuplicateRank {
        at: Location,
        first: Location,
        rank: u32,
    },
    #[error("MissingUrl at {at}")]
    MissingUrl { at: Location },
    #[error("EmptyLabel at {at}")]
    EmptyLabel { at: Location },
    #[error("invalid url at {at}: {source}")]
    InvalidUrl { at: Location, source: UrlError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListFormat {
    Csv,
    Json,
}

impl ListFormat {
    /// Guesses the format from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ListFormat::Json,
            _ => ListFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertEntry {
    /// Contiguous 1-based rank within this list.
    pub rank: u32,
    pub label: String,
    pub url: String,
    /// Rank in the original expert list, before any deduplication.
    pub source_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertList {
    pub name: String,
    pub source_url: String,
    #[serde(default)]
    pub retrieved_on: Option<NaiveDate>,
    pub entries: Vec<ExpertEntry>,
}

impl ExpertList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn renumbered(mut self) -> Self {
        for (i, e) in self.entries.iter_mut().enumerate() {
            e.rank = i as u32 + 1;
        }
        self
    }

    /// One [`Item`] per entry; the normalized URL doubles as the id.
    pub fn to_items(&self) -> Vec<Item> {
        self.entries
            .iter()
            .map(|e| Item::new(e.url.clone(), e.label.clone(), e.url.clone()))
            .collect()
    }

    /// The expert order as a [`Ranking`] over the ids of [`to_items`](Self::to_items).
    pub fn to_ranking(&self) -> Ranking {
        Ranking::new(
            self.name.clone(),
            self.entries.iter().map(|e| e.url.clone()).collect(),
        )
    }
}

#[derive(Debug, Deserialize)]
struct RawEntry {
    rank: serde_json::Value,
    /// Written by [`to_json`]; when present it is the rank that counts.
    #[serde(default)]
    source_rank: Option<serde_json::Value>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    url: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum JsonList {
    Bare(Vec<RawEntry>),
    Full {
        name: Option<String>,
        source_url: Option<String>,
        #[serde(default)]
        retrieved_on: Option<NaiveDate>,
        entries: Vec<RawEntry>,
    },
}

struct Row {
    at: Location,
    rank: u32,
    label: String,
    url: String,
}

fn parse_rank(raw: &str, at: Location) -> Result<u32, IngestError> {
    match raw.trim().parse::<u32>() {
        Ok(r) if r >= 1 => Ok(r),
        _ => Err(IngestError::Parse {
            at,
            msg: format!("rank must be a positive integer, got {raw:?}"),
        }),
    }
}

fn check_row(at: Location, rank: u32, label: &str, url: &str) -> Result<Row, IngestError> {
    let label = label.trim();
    if label.is_empty() {
        return Err(IngestError::EmptyLabel { at });
    }
    if url.trim().is_empty() {
        return Err(IngestError::MissingUrl { at });
    }
    let url = normalize_url(url).map_err(|source| IngestError::InvalidUrl { at, source })?;
    Ok(Row {
        at,
        rank,
        label: label.to_string(),
        url,
    })
}

fn csv_rows(text: &str) -> Result<Vec<Row>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Parse {
            at: Location::Line(1),
            msg: e.to_string(),
        })?
        .clone();
    if headers.iter().all(str::is_empty) {
        return Err(IngestError::Parse {
            at: Location::Line(1),
            msg: "empty file".into(),
        });
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::Parse {
                at: Location::Line(1),
                msg: format!("missing column {name}"),
            })
    };
    let (ci_rank, ci_label, ci_url) = (col("rank")?, col("label")?, col("url")?);

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Parse {
            at: Location::Line(e.position().map_or(0, |p| p.line() as usize)),
            msg: e.to_string(),
        })?;
        let at = Location::Line(record.position().map_or(0, |p| p.line() as usize));
        if record.iter().all(str::is_empty) {
            continue;
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let rank = parse_rank(field(ci_rank), at)?;
        rows.push(check_row(at, rank, field(ci_label), field(ci_url))?);
    }
    Ok(rows)
}

fn json_rows(entries: Vec<RawEntry>) -> Result<Vec<Row>, IngestError> {
    entries
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let at = Location::Entry(i + 1);
            let rank = match e.source_rank.as_ref().unwrap_or(&e.rank) {
                serde_json::Value::Number(n) => parse_rank(&n.to_string(), at)?,
                serde_json::Value::String(s) => parse_rank(s, at)?,
                other => parse_rank(&other.to_string(), at)?,
            };
            check_row(
                at,
                rank,
                e.label.as_deref().unwrap_or(""),
                e.url.as_deref().unwrap_or(""),
            )
        })
        .collect()
}

fn assemble(
    name: String,
    source_url: String,
    retrieved_on: Option<NaiveDate>,
    mut rows: Vec<Row>,
) -> Result<ExpertList, IngestError> {
    if rows.is_empty() {
        return Err(IngestError::Parse {
            at: Location::Line(1),
            msg: "no entries".into(),
        });
    }
    rows.sort_by_key(|r| r.rank);
    for w in rows.windows(2) {
        if w[0].rank == w[1].rank {
            // report the later occurrence in file order
            let (first, second) = match (w[0].at, w[1].at) {
                (Location::Line(a), Location::Line(b)) if a > b => (w[1].at, w[0].at),
                (Location::Entry(a), Location::Entry(b)) if a > b => (w[1].at, w[0].at),
                _ => (w[0].at, w[1].at),
            };
            return Err(IngestError::DuplicateRank {
                at: second,
                first,
                rank: w[0].rank,
            });
        }
    }
    let entries = rows
        .into_iter()
        .map(|r| ExpertEntry {
            rank: 0,
            label: r.label,
            url: r.url,
            source_rank: r.rank,
        })
        .collect();
    Ok(ExpertList {
        name,
        source_url,
        retrieved_on,
        entries,
    }
    .renumbered())
}

/// Parses an expert list from text. `name` and `source_url` are used when
/// the text itself does not carry them.
pub fn parse_expert_list(
    text: &str,
    format: ListFormat,
    name: &str,
    source_url: &str,
) -> Result<ExpertList, IngestError> {
    match format {
        ListFormat::Csv => assemble(name.into(), source_url.into(), None, csv_rows(text)?),
        ListFormat::Json => {
            if text.trim().is_empty() {
                return Err(IngestError::Parse {
                    at: Location::Line(1),
                    msg: "empty file".into(),
                });
            }
            let parsed: JsonList = serde_json::from_str(text).map_err(|e| IngestError::Parse {
                at: Location::Line(e.line()),
                msg: e.to_string(),
            })?;
            match parsed {
                JsonList::Bare(entries) => {
                    assemble(name.into(), source_url.into(), None, json_rows(entries)?)
                }
                JsonList::Full {
                    name: n,
                    source_url: s,
                    retrieved_on,
                    entries,
                } => assemble(
                    n.unwrap_or_else(|| name.into()),
                    s.unwrap_or_else(|| source_url.into()),
                    retrieved_on,
                    json_rows(entries)?,
                ),
            }
        }
    }
}

/// Loads a list from disk. For CSV the list is named after the file stem and
/// its provenance is the path.
pub fn load_expert_list(path: &Path, format: ListFormat) -> Result<ExpertList, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("list")
        .to_string();
    parse_expert_list(&text, format, &name, &path.display().to_string())
}

/// Serializes to CSV. The written rank is `source_rank`, so a reload
/// reproduces the list exactly, including gaps left by deduplication.
pub fn to_csv(list: &ExpertList) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "label", "url"]).expect("in-memory write");
    for e in &list.entries {
        w.write_record([e.source_rank.to_string().as_str(), &e.label, &e.url])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn to_json(list: &ExpertList) -> String {
    serde_json::to_string_pretty(list).expect("expert list serializes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupKey {
    Url,
    /// Case-insensitive, whitespace-trimmed label.
    Label,
}

/// Keeps the best-ranked occurrence of each key and renumbers ranks.
pub fn dedup(list: &ExpertList, key: DedupKey) -> ExpertList {
    let mut seen = HashSet::new();
    let entries = list
        .entries
        .iter()
        .filter(|e| {
            seen.insert(match key {
                DedupKey::Url => e.url.clone(),
                DedupKey::Label => e.label.trim().to_lowercase(),
            })
        })
        .cloned()
        .collect();
    ExpertList {
        entries,
        ..list.clone()
    }
    .renumbered()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncateMode {
    /// Entries whose original rank is within the top `n`. After
    /// deduplication this yields fewer than `n` entries when the window held
    /// duplicates.
    #[default]
    Window,
    /// The first `n` remaining entries.
    Positional,
}

pub fn truncate(list: &ExpertList, n: usize) -> ExpertList {
    truncate_with(list, n, TruncateMode::Window)
}

pub fn truncate_with(list: &ExpertList, n: usize, mode: TruncateMode) -> ExpertList {
    let entries = match mode {
        TruncateMode::Window => list
            .entries
            .iter()
            .filter(|e| (e.source_rank as usize) <= n)
            .cloned()
            .collect(),
        TruncateMode::Positional => list.entries.iter().take(n).cloned().collect(),
    };
    ExpertList {
        entries,
        ..list.clone()
    }
    .renumbered()
}
