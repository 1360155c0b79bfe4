use std::sync::Mutex;
use std::time::Duration;

use serde::Serialize;

use super::Reply;
use crate::prompt::{render, PromptMode};
use crate::scenario::DrivingScenario;
use crate::util::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRecord {
    pub scenario_hash: String,
    pub prompt_hash: String,
    pub raw_response: String,
    /// `ok` or the parse-failure category.
    pub outcome: String,
    pub cached: bool,
    pub latency_us: u64,
}

impl QueryRecord {
    pub fn new(scenario: &DrivingScenario, mode: PromptMode, reply: &Reply, latency: Duration) -> Self {
        let prompt = render(scenario, mode);
        Self {
            scenario_hash: sha256_hex(scenario.canonical_json()),
            prompt_hash: sha256_hex(format!("{}\u{0}{}", prompt.system, prompt.user)),
            raw_response: reply.raw.clone(),
            outcome: match &reply.outcome {
                Ok(_) => "ok".to_string(),
                Err(e) => e.category().to_string(),
            },
            cached: reply.cached,
            latency_us: latency.as_micros().try_into().unwrap_or(u64::MAX),
        }
    }
}

/// Append-only record of predictor queries; safe to share between threads.
#[derive(Debug, Default)]
pub struct QueryLog {
    records: Mutex<Vec<QueryRecord>>,
}

impl QueryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&self, record: QueryRecord) {
        self.records.lock().expect("query log poisoned").push(record);
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("query log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<QueryRecord> {
        self.records.lock().expect("query log poisoned").clone()
    }
}
