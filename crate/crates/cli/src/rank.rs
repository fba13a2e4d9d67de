//! `serank rank`: one ranking per (list, engine, n).

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::Serialize;

use serank::ingest::{dedup, load_expert_list, truncate, ExpertList, ListFormat};
use serank::oracle::{
    load_dialects, EngineClient, EngineDialect, HttpConfig, HttpTransport, QueryBudget, Recorder,
    ReplayCache, ReplayOracle, load_cache,
};
use serank::ranking::{write_query_log, QueryRecord};
use serank::sim::{make_score_oracle, perturb, HiddenScoreModel, NoiseModel, SimTransport};
use serank::{ordinal_rank, Ranking, RankingOracle};

use crate::config::{Backend, Mode, RankConfig};
use crate::error::{io_error, CliError, CliResult};
use crate::manifest::{write_json, Manifest};

pub fn ranking_file(list: &str, engine: &str, n: usize) -> String {
    format!("{list}__{engine}__n{n}.ranking.json")
}

pub fn querylog_file(list: &str, engine: &str, n: usize) -> String {
    format!("{list}__{engine}__n{n}.querylog.jsonl")
}

/// An `--engines` entry: `NAME` or `NAME=DIALECT`.
#[derive(Debug, Clone)]
struct EngineSpec {
    name: String,
    dialect: Option<EngineDialect>,
}

fn resolve_engines(cfg: &RankConfig) -> CliResult<Vec<EngineSpec>> {
    let mut table: HashMap<String, EngineDialect> = EngineDialect::builtins()
        .into_iter()
        .map(|d| (d.name.clone(), d))
        .collect();
    if let Some(path) = &cfg.dialects {
        let extra = load_dialects(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        table.extend(extra.into_iter().map(|d| (d.name.clone(), d)));
    }
    let mut specs = Vec::new();
    for raw in &cfg.engines {
        let (name, dialect_name, explicit) = match raw.split_once('=') {
            Some((n, d)) => (n.trim(), d.trim(), true),
            None => (raw.trim(), raw.trim(), false),
        };
        if name.is_empty() || name.contains(['/', '\\']) || name.contains("__") {
            return Err(CliError::config(format!("bad engine name {raw:?}")));
        }
        let dialect = table.get(dialect_name).cloned();
        if dialect.is_none() && (explicit || cfg.mode == Mode::Record) {
            let mut known: Vec<&String> = table.keys().collect();
            known.sort();
            return Err(CliError::config(format!(
                "unknown dialect {dialect_name:?} for engine {name}; known: {known:?}"
            )));
        }
        specs.push(EngineSpec {
            name: name.to_string(),
            dialect,
        });
    }
    // q must fit the tightest selected dialect
    for spec in &specs {
        if let Some(limit) = spec.dialect.as_ref().and_then(EngineDialect::max_urls_per_query) {
            if cfg.q > limit {
                return Err(CliError::config(format!(
                    "--q {} exceeds the {} URLs per query that dialect {} allows",
                    cfg.q,
                    limit,
                    spec.dialect.as_ref().map_or("", |d| d.name.as_str())
                )));
            }
        }
    }
    Ok(specs)
}

fn load_list(path: &Path, cfg: &RankConfig) -> CliResult<ExpertList> {
    let list = load_expert_list(path, ListFormat::from_path(path))?;
    Ok(match cfg.dedup.key() {
        Some(key) => dedup(&list, key),
        None => list,
    })
}

/// FNV-1a, used only to give each simulated engine a stable seed.
fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// The private URL order a simulated engine uses for one list.
fn simulated_order(list: &ExpertList, engine: &str, cfg: &RankConfig) -> Vec<String> {
    let noise = NoiseModel::new(
        cfg.noise_kind,
        cfg.noise_strength,
        cfg.seed ^ fnv1a(engine) ^ fnv1a(&list.name).rotate_left(17),
    );
    perturb(&list.to_ranking(), &noise).items
}

#[derive(Debug, Serialize)]
struct RunEntry {
    list: String,
    engine: String,
    n: usize,
    items: usize,
    ranked: usize,
    unranked: usize,
    queries: usize,
    ranking_file: Option<String>,
    querylog_file: String,
}

fn write_outputs(
    out: &Path,
    list: &str,
    engine: &str,
    n: usize,
    ranking: Option<&Ranking>,
    log: &[QueryRecord],
) -> CliResult<()> {
    let log_path = out.join(querylog_file(list, engine, n));
    let f = File::create(&log_path).map_err(|e| io_error(&log_path, e))?;
    write_query_log(log, BufWriter::new(f)).map_err(|e| io_error(&log_path, e))?;
    if let Some(r) = ranking {
        write_json(&out.join(ranking_file(list, engine, n)), r)?;
    }
    Ok(())
}

pub fn run(cfg: &RankConfig) -> CliResult<()> {
    let engines = resolve_engines(cfg)?;
    let lists = cfg
        .lists
        .iter()
        .map(|p| load_list(p, cfg))
        .collect::<CliResult<Vec<_>>>()?;
    let mut names: Vec<&str> = lists.iter().map(|l| l.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::config("expert lists must have distinct file names"));
    }

    // Fail before any work if a replay cache is missing.
    let mut caches: HashMap<String, Arc<ReplayCache>> = HashMap::new();
    if cfg.mode == Mode::Replay {
        let dir = cfg.cache.as_deref().expect("checked in resolve");
        for e in &engines {
            caches.insert(e.name.clone(), Arc::new(load_cache(dir, &e.name)?));
        }
    }
    let http = match (cfg.mode, cfg.backend) {
        (Mode::Record, Backend::Http) => {
            let path = cfg.http_config.as_deref().expect("checked in resolve");
            Some(HttpConfig::load(path).map_err(CliError::config)?)
        }
        _ => None,
    };
    let budgets: HashMap<String, Arc<QueryBudget>> = engines
        .iter()
        .filter_map(|e| {
            e.dialect
                .as_ref()
                .map(|d| (e.name.clone(), Arc::new(QueryBudget::new(e.name.clone(), d.daily_quota))))
        })
        .collect();

    fs::create_dir_all(&cfg.out).map_err(|e| io_error(&cfg.out, e))?;
    let mut entries = Vec::new();
    let mut latest: Option<DateTime<Utc>> = None;
    let mut failure = None;

    'outer: for list in &lists {
        for engine in &engines {
            let order = simulated_order(list, &engine.name, cfg);
            let mut oracle: Box<dyn RankingOracle> = match cfg.mode {
                Mode::Replay => Box::new(ReplayOracle::new(caches[&engine.name].clone())),
                Mode::Simulate => {
                    let items = list.to_items();
                    Box::new(make_score_oracle(
                        engine.name.clone(),
                        HiddenScoreModel::from_order(&order),
                        &items,
                    )?)
                }
                Mode::Record => {
                    let dialect = engine.dialect.clone().expect("checked in resolve_engines");
                    let budget = budgets[&engine.name].clone();
                    let dialect = EngineDialect {
                        name: engine.name.clone(),
                        ..dialect
                    };
                    let client: Box<dyn RankingOracle> = match &http {
                        Some(h) => Box::new(EngineClient::new(
                            dialect.clone(),
                            budget,
                            HttpTransport::new(h.clone()).map_err(CliError::config)?,
                        )),
                        None => Box::new(EngineClient::new(
                            dialect.clone(),
                            budget,
                            SimTransport::new(order.clone()),
                        )),
                    };
                    let dir = cfg.cache.as_deref().expect("checked in resolve");
                    Box::new(Recorder::new(client, dir, Some(dialect))?)
                }
            };
            for &n in &cfg.n {
                let window = truncate(list, n);
                log::info!("ranking {} (n={n}, {} items) with {}", list.name, window.len(), engine.name);
                let result = ordinal_rank(&window.to_items(), &mut oracle, cfg.q);
                let (ranking, state) = match &result {
                    Ok(o) => (Some(&o.ranking), Some(&o.state)),
                    Err(e) => (None, e.partial_state()),
                };
                let log = state.map(|s| s.query_log.as_slice()).unwrap_or(&[]);
                latest = log.iter().map(|r| r.timestamp).chain(latest).max();
                write_outputs(&cfg.out, &list.name, &engine.name, n, ranking, log)?;
                entries.push(RunEntry {
                    list: list.name.clone(),
                    engine: engine.name.clone(),
                    n,
                    items: window.len(),
                    ranked: ranking.map_or(0, |r| r.items.len()),
                    unranked: ranking.map_or(0, |r| r.unranked.len()),
                    queries: log.len(),
                    ranking_file: ranking.map(|_| ranking_file(&list.name, &engine.name, n)),
                    querylog_file: querylog_file(&list.name, &engine.name, n),
                });
                if let Err(e) = result {
                    failure = Some(CliError::from(e));
                    break 'outer;
                }
            }
        }
    }

    // Replayed runs are dated by the data they replay, so reruns are
    // byte-identical; live runs are dated now.
    let date = match cfg.mode {
        Mode::Replay => latest,
        _ => Some(Utc::now()),
    };
    let manifest = Manifest {
        command: "rank",
        version: env!("CARGO_PKG_VERSION"),
        date,
        seed: Some(cfg.seed),
        status: if failure.is_some() { "failed" } else { "ok" },
        error: failure.as_ref().map(|e| e.to_string()),
        config: cfg,
        outputs: entries,
    };
    write_json(&cfg.out.join("manifest.json"), &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Reads every `<list>__<engine>__n<N>.ranking.json` under `dir` for one list.
pub fn discover(dir: &Path, list: &str) -> CliResult<BTreeMap<(String, usize), PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
    let prefix = format!("{list}__");
    let mut found = BTreeMap::new();
    for entry in rd {
        let entry = entry.map_err(|e| io_error(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(rest) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".ranking.json")) else {
            continue;
        };
        let Some((engine, n)) = rest.rsplit_once("__n") else {
            continue;
        };
        if let Ok(n) = n.parse::<usize>() {
            found.insert((engine.to_string(), n), entry.path());
        }
    }
    Ok(found)
}
