//! Daily query quota per engine.

use chrono::{DateTime, NaiveDate, Utc};
use parking_lot::Mutex;

use super::OracleError;

/// Counts queries issued to one engine within the current UTC day.
///
/// Shared between concurrent runs through an `Arc`; acquisition is atomic.
#[derive(Debug)]
pub struct QueryBudget {
    engine: String,
    quota: u32,
    state: Mutex<Usage>,
}

#[derive(Debug, Clone, Copy)]
struct Usage {
    day: Option<NaiveDate>,
    used: u32,
}

impl QueryBudget {
    pub fn new(engine: impl Into<String>, quota: u32) -> Self {
        Self {
            engine: engine.into(),
            quota,
            state: Mutex::new(Usage { day: None, used: 0 }),
        }
    }

    pub fn engine(&self) -> &str {
        &self.engine
    }

    pub fn quota(&self) -> u32 {
        self.quota
    }

    pub fn used_today(&self) -> u32 {
        self.used_at(Utc::now())
    }

    pub fn used_at(&self, now: DateTime<Utc>) -> u32 {
        let state = self.state.lock();
        if state.day == Some(now.date_naive()) {
            state.used
        } else {
            0
        }
    }

    /// Reserves one query. The counter resets at UTC midnight.
    pub fn try_acquire(&self) -> Result<(), OracleError> {
        self.try_acquire_at(Utc::now())
    }

    pub fn try_acquire_at(&self, now: DateTime<Utc>) -> Result<(), OracleError> {
        let today = now.date_naive();
        let mut state = self.state.lock();
        if state.day != Some(today) {
            *state = Usage {
                day: Some(today),
                used: 0,
            };
        }
        if state.used >= self.quota {
            return Err(OracleError::QuotaExhausted {
                engine: self.engine.clone(),
                quota: self.quota,
            });
        }
        state.used += 1;
        Ok(())
    }
}
