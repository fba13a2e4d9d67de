//! Error classes and their exit codes.

use std::fmt;

use serank::ingest::IngestError;
use serank::oracle::{CacheError, OracleError};
use serank::RankError;

/// Exit codes are a stable contract for scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 1,
    Oracle = 2,
    Data = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(ExitKind::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self::new(ExitKind::Data, anyhow::anyhow!("{msg}"))
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let kind = match e {
            IngestError::Io { .. } => ExitKind::Config,
            _ => ExitKind::Data,
        };
        Self::new(kind, e)
    }
}

impl From<CacheError> for CliError {
    fn from(e: CacheError) -> Self {
        let kind = match e {
            CacheError::NotFound(_) | CacheError::Locked(_) | CacheError::Io { .. } => ExitKind::Config,
            CacheError::Parse { .. } | CacheError::Conflict { .. } => ExitKind::Data,
        };
        Self::new(kind, e)
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        Self::new(ExitKind::Oracle, e)
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        let kind = match e {
            RankError::OracleUnavailable { .. }
            | RankError::Oracle { .. }
            | RankError::InconsistentOracle { .. } => ExitKind::Oracle,
            RankError::BatchSize(_) => ExitKind::Config,
            RankError::Empty
            | RankError::DuplicateId(_)
            | RankError::DuplicateUrl(_)
            | RankError::InvalidUrl { .. } => ExitKind::Data,
        };
        Self::new(kind, e)
    }
}

/// Output-side I/O failures count as configuration problems (bad `--out`).
pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}
