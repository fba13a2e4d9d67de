//! `serank correlate`: expert-vs-engine and engine-vs-engine tables.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;

use chrono::{DateTime, Utc};
use serde::Serialize;

use serank::ingest::{dedup, load_expert_list, truncate, ListFormat};
use serank::ranking::read_query_log;
use serank::report::{compare, correlation_table, scatter_data, ComparisonCell};
use serank::stats::Thresholds;
use serank::Ranking;

use crate::config::CorrelateConfig;
use crate::error::{io_error, CliError, CliResult};
use crate::manifest::{write_json, write_text, Manifest};
use crate::rank::{discover, querylog_file};

#[derive(Debug, Serialize)]
struct Outputs {
    engines: Vec<String>,
    cells: usize,
    files: Vec<String>,
}

pub fn run(cfg: &CorrelateConfig) -> CliResult<()> {
    let raw = load_expert_list(&cfg.expert, ListFormat::from_path(&cfg.expert))?;
    let expert = match cfg.dedup.key() {
        Some(key) => dedup(&raw, key),
        None => raw,
    };
    let list = expert.name.clone();
    let found = discover(&cfg.rankings, &list)?;
    let engines: Vec<String> = match &cfg.engines {
        Some(e) => e.clone(),
        None => {
            let mut e: Vec<String> = found.keys().map(|(e, _)| e.clone()).collect();
            e.dedup();
            e
        }
    };
    if engines.is_empty() {
        return Err(CliError::data(format!(
            "MissingRanking: no rankings for list {list} in {}",
            cfg.rankings.display()
        )));
    }

    // rankings[n][engine]
    let mut rankings: BTreeMap<usize, BTreeMap<String, Ranking>> = BTreeMap::new();
    let mut latest: Option<DateTime<Utc>> = None;
    for &n in &cfg.n {
        for engine in &engines {
            let path = found.get(&(engine.clone(), n)).ok_or_else(|| {
                CliError::data(format!("MissingRanking: {list} / {engine} / n={n}"))
            })?;
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let r: Ranking = serde_json::from_str(&text)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            if !r.is_duplicate_free() {
                return Err(CliError::data(format!("{}: ranking repeats an item", path.display())));
            }
            rankings.entry(n).or_default().insert(engine.clone(), r);

            let log_path = cfg.rankings.join(querylog_file(&list, engine, n));
            if let Ok(f) = File::open(&log_path) {
                let log = read_query_log(BufReader::new(f))
                    .map_err(|e| CliError::data(format!("{}: {e}", log_path.display())))?;
                latest = log.iter().map(|r| r.timestamp).chain(latest).max();
            }
        }
    }

    let th = Thresholds::default();
    let mut cells = Vec::new();
    let expert_at = |n: usize| truncate(&expert, n).to_ranking();
    for engine in &engines {
        for &n in &cfg.n {
            let label = format!("{engine}/{list}");
            cells.push(cell(&label, n, &expert_at(n), &rankings[&n][engine], cfg, &th));
        }
    }
    for (i, a) in engines.iter().enumerate() {
        for b in &engines[i + 1..] {
            for &n in &cfg.n {
                let label = format!("{a}/{b}");
                cells.push(cell(&label, n, &rankings[&n][a], &rankings[&n][b], cfg, &th));
            }
        }
    }

    fs::create_dir_all(&cfg.out).map_err(|e| io_error(&cfg.out, e))?;
    let table = correlation_table(&cells);
    write_text(&cfg.out.join("table.txt"), &table.text)?;
    write_text(&cfg.out.join("table.csv"), &table.csv)?;
    let mut files = vec!["table.txt".to_string(), "table.csv".to_string()];
    for (n, by_engine) in &rankings {
        let name = format!("scatter_n{n}.csv");
        write_text(&cfg.out.join(&name), &scatter_data(&expert, by_engine, *n))?;
        files.push(name);
    }

    let manifest = Manifest {
        command: "correlate",
        version: env!("CARGO_PKG_VERSION"),
        date: latest,
        seed: None,
        status: "ok",
        error: None,
        config: cfg,
        outputs: Outputs {
            engines,
            cells: cells.len(),
            files,
        },
    };
    write_json(&cfg.out.join("manifest.json"), &manifest)
}

fn cell(
    label: &str,
    n: usize,
    a: &Ranking,
    b: &Ranking,
    cfg: &CorrelateConfig,
    th: &Thresholds,
) -> ComparisonCell {
    compare(label, n, a, b, cfg.method(), th, cfg.max_unindexed_fraction)
}
