//! Ordinal ranking of URLs through batched search-engine oracles, and Kendall
//! tau comparison of those rankings with expert lists and with each other.

pub mod ingest;
pub mod item;
pub mod oracle;
pub mod ranking;
pub mod report;
pub mod sim;
pub mod stats;

pub use item::{Item, Ranking};
pub use oracle::{BatchResult, OracleError, RankingOracle};
pub use ranking::{ordinal_rank, RankError, RankOutcome, RankingState};
