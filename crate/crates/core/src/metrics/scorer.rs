//! Client side of the `scorer/1` protocol.
//!
//! ```text
//! scorer -> client   {"protocol":"scorer/1","name":"comet","needs_reference":true}
//! client -> scorer   {"id":7,"src":"Hello.","mt":"Hallo.","ref":"Hallo!"}
//! scorer -> client   {"id":7,"score":0.8731}
//! ```
//!
//! Responses may come back in any order. Scores are memoized per handle, so
//! a repeated `(src, mt, ref)` triple crosses the wire once.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::utility::{MetricError, ScoreInput, ScoreRange, Utility};
use crate::wire::{self, Endpoint, LineConnection, WireError};

pub const SCORER_PROTOCOL: &str = "scorer/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: u64,
    pub src: String,
    pub mt: String,
    #[serde(rename = "ref")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub id: u64,
    pub score: f64,
}

#[derive(Debug, Deserialize)]
struct Handshake {
    name: String,
    needs_reference: bool,
}

type CacheKey = (String, String, String, Option<String>);

pub struct ScorerHandle {
    conn: LineConnection,
    name: String,
    needs_reference: bool,
    response_timeout: Duration,
    next_id: AtomicU64,
    wire_requests: AtomicUsize,
    cache: Mutex<HashMap<CacheKey, f64>>,
}

impl std::fmt::Debug for ScorerHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScorerHandle")
            .field("name", &self.name)
            .field("needs_reference", &self.needs_reference)
            .finish_non_exhaustive()
    }
}

/// Connects to a scorer process or socket and performs the handshake.
pub fn scorer_connect(endpoint: &Endpoint, handshake_timeout: Duration) -> Result<ScorerHandle, WireError> {
    ScorerHandle::handshake(LineConnection::open(endpoint)?, handshake_timeout)
}

impl ScorerHandle {
    /// Completes the handshake on an already open connection.
    pub fn handshake(conn: LineConnection, timeout: Duration) -> Result<Self, WireError> {
        let hs = conn.read_handshake(timeout)?;
        wire::expect_protocol(&hs, SCORER_PROTOCOL)?;
        let Handshake {
            name,
            needs_reference,
        } = serde_json::from_value(hs.clone())
            .map_err(|e| WireError::Protocol(format!("bad scorer handshake {hs}: {e}")))?;
        Ok(ScorerHandle {
            conn,
            name,
            needs_reference,
            response_timeout: wire::DEFAULT_RESPONSE_TIMEOUT,
            next_id: AtomicU64::new(0),
            wire_requests: AtomicUsize::new(0),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_response_timeout(mut self, timeout: Duration) -> Self {
        self.response_timeout = timeout;
        self
    }

    /// Number of requests written to the wire so far.
    pub fn wire_requests(&self) -> usize {
        self.wire_requests.load(Ordering::SeqCst)
    }

    pub fn clear_cache(&self) {
        self.cache.lock().expect("score cache poisoned").clear();
    }

    fn key(&self, input: &ScoreInput<'_>) -> CacheKey {
        (
            self.name.clone(),
            input.src.to_string(),
            input.mt.to_string(),
            input.reference.map(str::to_string),
        )
    }

    fn fetch(&self, misses: &[CacheKey]) -> Result<Vec<f64>, MetricError> {
        let first = self.next_id.fetch_add(misses.len() as u64, Ordering::SeqCst);
        let requests: Vec<(u64, Value)> = misses
            .iter()
            .enumerate()
            .map(|(k, (_, src, mt, reference))| {
                let id = first + k as u64;
                let req = ScoreRequest {
                    id,
                    src: src.clone(),
                    mt: mt.clone(),
                    reference: reference.clone(),
                };
                (id, serde_json::to_value(req).expect("request serializes"))
            })
            .collect();
        self.wire_requests.fetch_add(requests.len(), Ordering::SeqCst);
        let mut responses = self.conn.exchange(&requests, self.response_timeout)?;

        requests
            .iter()
            .map(|(id, _)| {
                let raw = responses.remove(id).expect("exchange answers every id");
                let resp: ScoreResponse = serde_json::from_value(raw.clone()).map_err(|e| {
                    WireError::Protocol(format!("bad score response {raw}: {e}"))
                })?;
                if !resp.score.is_finite() {
                    return Err(MetricError::NonFinite { id: *id });
                }
                Ok(resp.score)
            })
            .collect()
    }
}

impl Utility for ScorerHandle {
    fn name(&self) -> &str {
        &self.name
    }

    fn needs_reference(&self) -> bool {
        self.needs_reference
    }

    fn needs_source(&self) -> bool {
        true
    }

    /// External scorers declare no bounds; neural metrics may overshoot
    /// their nominal range.
    fn range(&self) -> ScoreRange {
        ScoreRange::UNBOUNDED
    }

    fn score_batch(&self, inputs: &[ScoreInput<'_>]) -> Result<Vec<f64>, MetricError> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        if self.needs_reference && inputs.iter().any(|i| i.reference.is_none()) {
            return Err(MetricError::MissingReference(self.name.clone()));
        }

        let keys: Vec<CacheKey> = inputs.iter().map(|i| self.key(i)).collect();
        let mut results: Vec<Option<f64>> = vec![None; keys.len()];
        let mut misses: Vec<CacheKey> = Vec::new();
        {
            let cache = self.cache.lock().expect("score cache poisoned");
            let mut queued = std::collections::HashSet::new();
            for (slot, key) in results.iter_mut().zip(&keys) {
                match cache.get(key) {
                    Some(&score) => *slot = Some(score),
                    None => {
                        if queued.insert(key) {
                            misses.push(key.clone());
                        }
                    }
                }
            }
        }

        if !misses.is_empty() {
            let scores = self.fetch(&misses)?;
            let fresh: HashMap<&CacheKey, f64> = misses.iter().zip(scores.iter().copied()).collect();
            for (slot, key) in results.iter_mut().zip(&keys) {
                if slot.is_none() {
                    *slot = fresh.get(key).copied();
                }
            }
            let mut cache = self.cache.lock().expect("score cache poisoned");
            for (key, score) in misses.into_iter().zip(scores) {
                cache.insert(key, score);
            }
        }

        Ok(results.into_iter().map(|s| s.expect("every input scored")).collect())
    }
}
