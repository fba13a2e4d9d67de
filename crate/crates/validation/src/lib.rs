//! Reference oracles for checking serank against values worked out
//! independently of its implementation: brute-force statistics, full
//! enumeration of permutations, and published figures.

use serank::oracle::{BatchResult, OracleError};
use serank::{Item, RankingOracle};

/// Answers every batch in plain string order of the URLs.
#[derive(Debug, Default)]
pub struct LexOracle {
    pub calls: usize,
}

impl RankingOracle for LexOracle {
    fn engine(&self) -> &str {
        "lex"
    }

    fn rank(&mut self, urls: &[String]) -> Result<BatchResult, OracleError> {
        self.calls += 1;
        let mut sorted = urls.to_vec();
        sorted.sort();
        BatchResult::from_answer(urls, sorted)
    }
}

pub fn letter_url(c: char) -> String {
    format!("http://{}.example/", c.to_ascii_lowercase())
}

/// Items named by single letters, in the given order.
pub fn letter_items(letters: &str) -> Vec<Item> {
    letters
        .chars()
        .map(|c| Item::new(c.to_string(), c.to_string(), letter_url(c)))
        .collect()
}

pub const WALKTHROUGH_INPUT: &str = "GEBACHFD";

/// The ten batches of the worked example, in query order.
pub const WALKTHROUGH_TRACE: [&str; 10] = ["GEB", "GAC", "ABE", "CBE", "GHF", "FAB", "FCE", "HD", "DAB", "DCE"];

/// C − D by checking every pair.
pub fn brute_force_statistic(x: &[usize], y: &[usize]) -> i64 {
    assert_eq!(x.len(), y.len());
    let mut t = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            t += (x[i] as i64 - x[j] as i64).signum() * (y[i] as i64 - y[j] as i64).signum();
        }
    }
    t
}

/// Every permutation of `0..n`, lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    // next-permutation loop
    loop {
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
}

/// Two-sided permutation p-value for statistic `t`, by enumerating all n!
/// orderings. Feasible up to n = 10.
pub fn enumerated_p(t: i64, n: usize) -> f64 {
    let id: Vec<usize> = (0..n).collect();
    let perms = permutations(n);
    let hits = perms.iter().filter(|p| brute_force_statistic(&id, p).abs() >= t.abs()).count();
    hits as f64 / perms.len() as f64
}

/// A published correlation cell: label, n, tau and p as printed, and
/// whether it was set in bold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedCell {
    pub comparison: &'static str,
    pub n: usize,
    pub tau: f64,
    pub p: f64,
    pub bold: bool,
}

const fn cell(comparison: &'static str, n: usize, tau: f64, p: f64, bold: bool) -> PublishedCell {
    PublishedCell { comparison, n, tau, p, bold }
}

/// The ARWU engine table.
pub const ARWU_TABLE: [PublishedCell; 18] = [
    cell("Live/ARWU", 10, -0.0222, 1.0, false),
    cell("Live/ARWU", 25, 0.0066, 0.9813, false),
    cell("Live/ARWU", 50, -0.1167, 0.2349, false),
    cell("Yahoo/ARWU", 10, 0.5111, 0.0490, true),
    cell("Yahoo/ARWU", 25, 0.4666, 0.0011, true),
    cell("Yahoo/ARWU", 50, 0.3436, 0.0004, false),
    cell("Google/ARWU", 10, 0.1555, 0.5915, false),
    cell("Google/ARWU", 25, 0.0733, 0.6238, false),
    cell("Google/ARWU", 50, 0.0008, 1.0, false),
    cell("Live/Yahoo", 10, 0.2000, 0.4742, false),
    cell("Live/Yahoo", 25, 0.2599, 0.0721, false),
    cell("Live/Yahoo", 50, 0.1183, 0.2283, false),
    cell("Live/Google", 10, 0.5555, 0.0318, true),
    cell("Live/Google", 25, 0.2666, 0.0650, false),
    cell("Live/Google", 50, 0.1151, 0.2415, false),
    cell("Yahoo/Google", 10, 0.6444, 0.0122, true),
    cell("Yahoo/Google", 25, 0.2066, 0.1542, false),
    cell("Yahoo/Google", 50, -0.0775, 0.4316, false),
];

/// The five business-school home pages used in the query examples.
pub const SCHOOLS: [&str; 5] = [
    "http://www.hbs.edu/",
    "http://www.gsb.stanford.edu/",
    "http://mba.wharton.upenn.edu/",
    "http://mitsloan.mit.edu/mba",
    "http://www.kellogg.northwestern.edu/",
];

/// The host-only form of the school query, line-wrapped as printed.
pub const SCHOOLS_HOST_ONLY_LISTING: &str = "site:www.hbs.edu/ OR site:www.gsb.stanford.edu/ OR
site:mba.wharton.upenn.edu/ OR site:mitsloan.mit.edu/ OR
site:www.kellogg.northwestern.edu/";

/// The full-URL form of the school query, one clause per line as printed.
pub const SCHOOLS_FULL_URL_LISTING: &str = "site:http://www.hbs.edu/ OR
site:http://www.gsb.stanford.edu/ OR
site:http://mba.wharton.upenn.edu/ OR
site:http://mitsloan.mit.edu/mba OR
site:http://www.kellogg.northwestern.edu/";

/// Joins wrapped lines back into a single-space query string.
pub fn unwrap_listing(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_counts() {
        assert_eq!(permutations(0).len(), 1);
        assert_eq!(permutations(5).len(), 120);
        let p = permutations(4);
        assert_eq!(p.first().unwrap(), &vec![0, 1, 2, 3]);
        assert_eq!(p.last().unwrap(), &vec![3, 2, 1, 0]);
    }

    #[test]
    fn brute_force_extremes() {
        let id: Vec<usize> = (0..6).collect();
        let rev: Vec<usize> = id.iter().rev().copied().collect();
        assert_eq!(brute_force_statistic(&id, &id), 15);
        assert_eq!(brute_force_statistic(&id, &rev), -15);
        assert_eq!(enumerated_p(15, 6), 2.0 / 720.0);
        assert_eq!(enumerated_p(1, 6), 1.0);
    }

    #[test]
    fn published_table_shape() {
        assert_eq!(ARWU_TABLE.iter().filter(|c| c.bold).count(), 4);
        assert!(ARWU_TABLE.chunks(3).all(|g| g.iter().map(|c| c.n).eq([10, 25, 50])));
    }
}
