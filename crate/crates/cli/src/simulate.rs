//! `serank simulate`: noise-strength sweep.

use std::fs;

use serank::sim::{sweep, sweep_csv};

use crate::config::SimulateConfig;
use crate::error::{io_error, CliResult};
use crate::manifest::{write_json, write_text, Manifest};

pub fn run(cfg: &SimulateConfig) -> CliResult<()> {
    let rows = sweep(&cfg.n, cfg.noise_kind, &cfg.strengths, cfg.seeds, cfg.seed);
    fs::create_dir_all(&cfg.out).map_err(|e| io_error(&cfg.out, e))?;
    write_text(&cfg.out.join("sweep.csv"), &sweep_csv(&rows))?;
    let manifest = Manifest {
        command: "simulate",
        version: env!("CARGO_PKG_VERSION"),
        date: Some(chrono::Utc::now()),
        seed: Some(cfg.seed),
        status: "ok",
        error: None,
        config: cfg,
        outputs: ["sweep.csv"],
    };
    write_json(&cfg.out.join("manifest.json"), &manifest)
}
