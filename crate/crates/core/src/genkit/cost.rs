//! Token accounting per backend call.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, DataError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CostError {
    #[error("baseline ledger has no tokens")]
    ZeroBaseline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRecord {
    pub segment_id: String,
    /// What the call was for, e.g. `generate`, `greedy`, `choose_best`.
    pub purpose: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl CostRecord {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// Append-only list of call records; safe to append from many threads.
#[derive(Debug, Default)]
pub struct CostLedger {
    records: Mutex<Vec<CostRecord>>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<CostRecord>) -> Self {
        CostLedger {
            records: Mutex::new(records),
        }
    }

    pub fn append(&self, record: CostRecord) {
        self.records.lock().expect("ledger poisoned").push(record);
    }

    /// Appends every record of `other`.
    pub fn merge(&self, other: &CostLedger) {
        let theirs = other.records();
        self.records.lock().expect("ledger poisoned").extend(theirs);
    }

    pub fn records(&self) -> Vec<CostRecord> {
        self.records.lock().expect("ledger poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("ledger poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn prompt_tokens(&self) -> u64 {
        self.records.lock().expect("ledger poisoned").iter().map(|r| r.prompt_tokens).sum()
    }

    pub fn completion_tokens(&self) -> u64 {
        self.records.lock().expect("ledger poisoned").iter().map(|r| r.completion_tokens).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.records.lock().expect("ledger poisoned").iter().map(CostRecord::total).sum()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        Ok(Self::from_records(data::load_records(path)?))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        data::write_jsonl(path, self.records())
    }
}

/// Total tokens of `ledger` divided by total tokens of `baseline`.
pub fn relative_cost(ledger: &CostLedger, baseline: &CostLedger) -> Result<f64, CostError> {
    let base = baseline.total_tokens();
    if base == 0 {
        return Err(CostError::ZeroBaseline);
    }
    Ok(ledger.total_tokens() as f64 / base as f64)
}
