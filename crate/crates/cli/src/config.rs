//! Command-line flags, the optional JSON config file, and the resolved
//! per-command configs (flags win over the file, the file over defaults).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use serank::ingest::DedupKey;
use serank::ranking::DEFAULT_BATCH_SIZE;
use serank::sim::NoiseKind;
use serank::stats::{PValueMethod, MIN_NORMAL_N};

use crate::error::{CliError, CliResult};

pub const DEFAULT_N: [usize; 3] = [10, 25, 50];

#[derive(Debug, Parser)]
#[command(name = "serank", version, about = "Rank URLs with search-engine oracles and correlate against expert lists")]
pub struct Cli {
    /// JSON file with default values for any flag
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank each expert list with each engine and write ranking files
    Rank(RankArgs),
    /// Correlate engine rankings with an expert list and between engines
    Correlate(CorrelateArgs),
    /// Sweep noise strength and report how tau degrades
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Query engines and record every answer to the cache
    Record,
    /// Answer from the cache only
    Replay,
    /// Use noisy copies of the expert order as engines, no cache
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Simulated engine behind the real query builder and budget
    Sim,
    /// JSON search API described by --http-config
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dedup {
    Url,
    Label,
    None,
}

impl Dedup {
    pub fn key(self) -> Option<DedupKey> {
        match self {
            Dedup::Url => Some(DedupKey::Url),
            Dedup::Label => Some(DedupKey::Label),
            Dedup::None => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Expert list files (CSV or JSON)
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub lists: Option<Vec<PathBuf>>,
    /// Engines as NAME or NAME=DIALECT; NAME alone also names the dialect
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub engines: Option<Vec<String>>,
    /// URLs per query
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// List sizes (top-n windows of each list)
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra dialect definitions (JSON); these override built-ins of the same name
    #[arg(long)]
    pub dialects: Option<PathBuf>,
    /// Backend used in record mode
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    #[arg(long)]
    pub http_config: Option<PathBuf>,
    /// Noise applied to the expert order to make each simulated engine
    #[arg(long)]
    pub noise_kind: Option<NoiseKind>,
    #[arg(long)]
    pub noise_strength: Option<f64>,
    #[arg(long, value_enum)]
    pub dedup: Option<Dedup>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Directory holding ranking files written by `rank`
    #[arg(long)]
    pub rankings: Option<PathBuf>,
    /// Expert list the rankings were made from
    #[arg(long)]
    pub expert: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Engines in table order (default: every engine found, by name)
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub engines: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Drop a cell when more than this share of its items went unranked
    #[arg(long)]
    pub max_unindexed_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub p_method: Option<PMethod>,
    /// With --p-method auto, use the exact test below this n
    #[arg(long)]
    pub exact_below: Option<usize>,
    #[arg(long, value_enum)]
    pub dedup: Option<Dedup>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub strengths: Option<Vec<f64>>,
    /// Replicates per (n, strength) cell
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_kind: Option<NoiseKind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Values a config file may provide. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub lists: Option<Vec<PathBuf>>,
    pub engines: Option<Vec<String>>,
    pub q: Option<usize>,
    pub mode: Option<Mode>,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub n: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub dialects: Option<PathBuf>,
    pub backend: Option<Backend>,
    pub http_config: Option<PathBuf>,
    pub noise_kind: Option<NoiseKind>,
    pub noise_strength: Option<f64>,
    pub dedup: Option<Dedup>,
    pub rankings: Option<PathBuf>,
    pub expert: Option<PathBuf>,
    pub max_unindexed_fraction: Option<f64>,
    pub p_method: Option<PMethod>,
    pub exact_below: Option<usize>,
    pub strengths: Option<Vec<f64>>,
    pub seeds: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::config(format!("missing required --{flag}")))
}

fn check_n(n: &[usize]) -> CliResult<()> {
    if n.is_empty() || n.contains(&0) {
        return Err(CliError::config("--n needs positive list sizes"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankConfig {
    pub lists: Vec<PathBuf>,
    pub engines: Vec<String>,
    pub q: usize,
    pub mode: Mode,
    pub cache: Option<PathBuf>,
    pub out: PathBuf,
    pub n: Vec<usize>,
    pub seed: u64,
    pub dialects: Option<PathBuf>,
    pub backend: Backend,
    pub http_config: Option<PathBuf>,
    pub noise_kind: NoiseKind,
    pub noise_strength: f64,
    pub dedup: Dedup,
}

impl RankConfig {
    pub fn resolve(a: RankArgs, f: FileConfig) -> CliResult<Self> {
        let cfg = Self {
            lists: required(a.lists.or(f.lists), "lists")?,
            engines: required(a.engines.or(f.engines), "engines")?,
            q: a.q.or(f.q).unwrap_or(DEFAULT_BATCH_SIZE),
            mode: required(a.mode.or(f.mode), "mode")?,
            cache: a.cache.or(f.cache),
            out: required(a.out.or(f.out), "out")?,
            n: a.n.or(f.n).unwrap_or_else(|| DEFAULT_N.to_vec()),
            seed: a.seed.or(f.seed).unwrap_or(0),
            dialects: a.dialects.or(f.dialects),
            backend: a.backend.or(f.backend).unwrap_or(Backend::Sim),
            http_config: a.http_config.or(f.http_config),
            noise_kind: a.noise_kind.or(f.noise_kind).unwrap_or(NoiseKind::Dispersion),
            noise_strength: a.noise_strength.or(f.noise_strength).unwrap_or(2.0),
            dedup: a.dedup.or(f.dedup).unwrap_or(Dedup::Url),
        };
        check_n(&cfg.n)?;
        if cfg.lists.is_empty() || cfg.engines.is_empty() {
            return Err(CliError::config("need at least one list and one engine"));
        }
        if cfg.q < 2 {
            return Err(CliError::config(format!("--q must be at least 2, got {}", cfg.q)));
        }
        if matches!(cfg.mode, Mode::Record | Mode::Replay) && cfg.cache.is_none() {
            return Err(CliError::config("record and replay modes need --cache"));
        }
        if cfg.mode == Mode::Record && cfg.backend == Backend::Http && cfg.http_config.is_none() {
            return Err(CliError::config("--backend http needs --http-config"));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelateConfig {
    pub rankings: PathBuf,
    pub expert: PathBuf,
    pub n: Vec<usize>,
    pub engines: Option<Vec<String>>,
    pub out: PathBuf,
    pub max_unindexed_fraction: f64,
    pub p_method: PMethod,
    pub exact_below: usize,
    pub dedup: Dedup,
}

impl CorrelateConfig {
    pub fn resolve(a: CorrelateArgs, f: FileConfig) -> CliResult<Self> {
        let cfg = Self {
            rankings: required(a.rankings.or(f.rankings), "rankings")?,
            expert: required(a.expert.or_else(|| f.expert.or_else(|| f.lists.and_then(|l| l.into_iter().next()))), "expert")?,
            n: a.n.or(f.n).unwrap_or_else(|| DEFAULT_N.to_vec()),
            engines: a.engines.or(f.engines),
            out: required(a.out.or(f.out), "out")?,
            max_unindexed_fraction: a.max_unindexed_fraction.or(f.max_unindexed_fraction).unwrap_or(0.2),
            p_method: a.p_method.or(f.p_method).unwrap_or(PMethod::Auto),
            exact_below: a.exact_below.or(f.exact_below).unwrap_or(MIN_NORMAL_N),
            dedup: a.dedup.or(f.dedup).unwrap_or(Dedup::Url),
        };
        check_n(&cfg.n)?;
        if !(0.0..=1.0).contains(&cfg.max_unindexed_fraction) {
            return Err(CliError::config("--max-unindexed-fraction must be within [0, 1]"));
        }
        Ok(cfg)
    }

    pub fn method(&self) -> PValueMethod {
        match self.p_method {
            PMethod::Auto => PValueMethod::Auto {
                exact_below: self.exact_below,
            },
            PMethod::Exact => PValueMethod::Exact,
            PMethod::Normal => PValueMethod::NormalApprox,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub n: Vec<usize>,
    pub strengths: Vec<f64>,
    pub seeds: usize,
    pub seed: u64,
    pub noise_kind: NoiseKind,
    pub out: PathBuf,
}

impl SimulateConfig {
    pub fn resolve(a: SimulateArgs, f: FileConfig) -> CliResult<Self> {
        let cfg = Self {
            n: a.n.or(f.n).unwrap_or_else(|| DEFAULT_N.to_vec()),
            strengths: a.strengths.or(f.strengths).unwrap_or_else(|| vec![0.0, 2.0, 5.0, 10.0]),
            seeds: a.seeds.or(f.seeds).unwrap_or(500),
            seed: a.seed.or(f.seed).unwrap_or(0),
            noise_kind: a.noise_kind.or(f.noise_kind).unwrap_or(NoiseKind::AdjacentSwap),
            out: required(a.out.or(f.out), "out")?,
        };
        check_n(&cfg.n)?;
        if cfg.n.contains(&1) {
            return Err(CliError::config("--n values must be at least 2"));
        }
        if cfg.seeds == 0 {
            return Err(CliError::config("--seeds must be positive"));
        }
        if cfg.strengths.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(CliError::config("--strengths must be finite and non-negative"));
        }
        Ok(cfg)
    }
}
