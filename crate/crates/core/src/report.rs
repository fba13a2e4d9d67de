//! Correlation tables and scatter-plot data.
//!
//! Rendering is pure: the same cells always give the same bytes. The text
//! table shows tau and p cut (not rounded) to 4 decimals. The CSV carries 12
//! significant digits, which is more than the p-value computation guarantees
//! and keeps the output stable across floating-point libraries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{truncate, ExpertList};
use crate::item::Ranking;
use crate::stats::{
    classify, correlate, Classification, CorrelationResult, PValueMethod, RankPairing, StatsError,
    Thresholds,
};

/// One row of a correlation table: a comparison at one list size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    /// e.g. `Yahoo/ARWU` or `Live/Google`.
    pub comparison: String,
    pub n: usize,
    pub tau: Option<f64>,
    pub p: Option<f64>,
    pub classification: Option<Classification>,
    pub drop_reason: Option<String>,
}

impl ComparisonCell {
    pub fn computed(comparison: impl Into<String>, n: usize, tau: f64, p: f64, th: &Thresholds) -> Self {
        Self {
            comparison: comparison.into(),
            n,
            tau: Some(tau),
            p: Some(p),
            classification: Some(classify(tau, p, th)),
            drop_reason: None,
        }
    }

    pub fn from_result(comparison: impl Into<String>, r: &CorrelationResult) -> Self {
        Self {
            comparison: comparison.into(),
            n: r.n,
            tau: Some(r.tau),
            p: Some(r.p_two_sided),
            classification: Some(r.classification),
            drop_reason: None,
        }
    }

    pub fn dropped(comparison: impl Into<String>, n: usize, reason: impl Into<String>) -> Self {
        Self {
            comparison: comparison.into(),
            n,
            tau: None,
            p: None,
            classification: None,
            drop_reason: Some(reason.into()),
        }
    }

    pub fn is_dropped(&self) -> bool {
        self.drop_reason.is_some()
    }

    /// Marked in tables: significant with a moderate or strong tau.
    pub fn bold(&self) -> bool {
        self.classification.is_some_and(Classification::is_marked)
    }
}

/// Compares two rankings of the same list and builds a cell.
///
/// `n` is the nominal list size. Items missing from either ranking are
/// dropped pairwise; if more than `max_unindexed_fraction` of the `a` side is
/// lost that way the whole cell is dropped instead.
pub fn compare(
    comparison: &str,
    n: usize,
    a: &Ranking,
    b: &Ranking,
    method: PValueMethod,
    th: &Thresholds,
    max_unindexed_fraction: f64,
) -> ComparisonCell {
    let pairing = RankPairing::from_rankings(a, b);
    let total = a.items.len().max(1);
    let missing = a.items.len() - pairing.n();
    if missing as f64 / total as f64 > max_unindexed_fraction {
        return ComparisonCell::dropped(comparison, n, format!("{missing} URLs not indexed"));
    }
    match correlate(&pairing, method, th) {
        Ok(r) => ComparisonCell {
            n,
            ..ComparisonCell::from_result(comparison, &r)
        },
        Err(StatsError::TooFewItems { n: k, .. }) => {
            ComparisonCell::dropped(comparison, n, format!("only {k} common items"))
        }
        Err(e) => ComparisonCell::dropped(comparison, n, e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

/// Cuts the shortest round-trip decimal form of `x` to 4 decimals. Working
/// on the decimal string avoids binary artifacts (0.29 stays 0.2900).
pub fn fixed4(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = x.to_string();
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let frac: String = frac.chars().chain(std::iter::repeat('0')).take(4).collect();
    if frac == "0000" && int == "-0" {
        return "0.0000".into();
    }
    format!("{int}.{frac}")
}

/// `x` rounded to 12 significant digits, in plain decimal notation without
/// trailing zeros.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    // value = 0.d1d2... * 10^(exp + 1)
    let point = exp + 1;
    let mut out = if point <= 0 {
        format!("0.{}{digits}", "0".repeat((-point) as usize))
    } else if point as usize >= digits.len() {
        format!("{digits}{}", "0".repeat(point as usize - digits.len()))
    } else {
        let (a, b) = digits.split_at(point as usize);
        format!("{a}.{b}")
    };
    if out.contains('.') {
        out.truncate(out.trim_end_matches('0').trim_end_matches('.').len());
    }
    format!("{sign}{out}")
}

const TABLE_CSV_HEADER: [&str; 7] = ["comparison", "n", "tau", "p", "classification", "dropped", "drop_reason"];

/// Renders cells in the given order, one row each. Marked rows end in `*`;
/// a rule separates consecutive comparison labels.
pub fn correlation_table(cells: &[ComparisonCell]) -> RenderedTable {
    let width = cells
        .iter()
        .map(|c| c.comparison.chars().count() + 2)
        .max()
        .unwrap_or(0)
        .max(20);
    let header = format!("{:<width$}{:>4}  {:>7}  {:>6}", "Comparison", "n", "tau", "p");
    let mut text = String::new();
    text.push_str(&header);
    text.push('\n');
    text.push_str(&"-".repeat(header.len()));
    text.push('\n');
    let mut prev: Option<&str> = None;
    for c in cells {
        if prev.is_some_and(|p| p != c.comparison) {
            text.push_str(&"-".repeat(header.len()));
            text.push('\n');
        }
        prev = Some(&c.comparison);
        let lead = format!("{:<width$}{:>4}", c.comparison, c.n);
        match (&c.drop_reason, c.tau, c.p) {
            (None, Some(tau), Some(p)) => {
                let mark = if c.bold() { " *" } else { "" };
                text.push_str(&format!("{lead}  {:>7}  {:>6}{mark}\n", fixed4(tau), fixed4(p)));
            }
            (reason, _, _) => {
                let reason = reason.as_deref().unwrap_or("no value");
                text.push_str(&format!("{lead}  dropped: {reason}\n"));
            }
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_CSV_HEADER).expect("in-memory write");
    let opt = |v: Option<f64>| v.map(sig12).unwrap_or_default();
    for c in cells {
        w.write_record([
            c.comparison.clone(),
            c.n.to_string(),
            opt(c.tau),
            opt(c.p),
            c.classification.map(|k| k.to_string()).unwrap_or_default(),
            c.is_dropped().to_string(),
            c.drop_reason.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    let csv = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    RenderedTable { text, csv }
}

/// Scatter rows `engine,item_id,expert_rank,engine_rank` for the top-`n`
/// window of `expert`, engines in name order. Items an engine left unranked
/// get an empty `engine_rank`.
pub fn scatter_data(expert: &ExpertList, rankings: &BTreeMap<String, Ranking>, n: usize) -> String {
    let window = truncate(expert, n);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["engine", "item_id", "expert_rank", "engine_rank"])
        .expect("in-memory write");
    for (engine, ranking) in rankings {
        for e in &window.entries {
            let engine_rank = ranking.rank_of(&e.url).map(|r| r.to_string()).unwrap_or_default();
            w.write_record([engine.as_str(), &e.url, &e.rank.to_string(), &engine_rank])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
