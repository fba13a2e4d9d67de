//! Run manifests and JSON output helpers.

use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Serialize, Serializer};

use crate::error::{io_error, CliResult};

fn rfc3339<S: Serializer>(d: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
    match d {
        Some(d) => s.serialize_str(&d.to_rfc3339_opts(SecondsFormat::Secs, true)),
        None => s.serialize_none(),
    }
}

/// Everything needed to rerun a command: the resolved config, the seed, and
/// the date the data refers to.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize, O: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    #[serde(serialize_with = "rfc3339")]
    pub date: Option<DateTime<Utc>>,
    pub seed: Option<u64>,
    pub status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: &'a C,
    pub outputs: O,
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
