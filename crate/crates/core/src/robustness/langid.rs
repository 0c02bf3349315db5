//! Language identification over the `langid/1` line protocol.
//!
//! ```text
//! identifier -> client  {"protocol":"langid/1","name":"fasttext-lid"}
//! client -> identifier  {"id":3,"text":"Guten Morgen"}
//! identifier -> client  {"id":3,"lang":"de"}
//! ```

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

use crate::data::EnsembleSelection;
use crate::wire::{self, Endpoint, LineConnection, WireError};

pub const LANGID_PROTOCOL: &str = "langid/1";

#[derive(Debug, Error)]
pub enum LangIdError {
    #[error("no selections to classify")]
    Empty,
    #[error(transparent)]
    Wire(#[from] WireError),
}

pub trait LanguageIdentifier: Send + Sync {
    /// One ISO 639-1 code per text, in input order.
    fn identify_batch(&self, texts: &[&str]) -> Result<Vec<String>, LangIdError>;
}

pub struct LangIdHandle {
    conn: LineConnection,
    name: String,
    next_id: AtomicU64,
    response_timeout: Duration,
}

impl LangIdHandle {
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self, WireError> {
        Self::handshake(LineConnection::open(endpoint)?, timeout)
    }

    pub fn handshake(conn: LineConnection, timeout: Duration) -> Result<Self, WireError> {
        let hs = conn.read_handshake(timeout)?;
        wire::expect_protocol(&hs, LANGID_PROTOCOL)?;
        let name = hs.get("name").and_then(Value::as_str).unwrap_or("").to_string();
        Ok(LangIdHandle {
            conn,
            name,
            next_id: AtomicU64::new(0),
            response_timeout: wire::DEFAULT_RESPONSE_TIMEOUT,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl LanguageIdentifier for LangIdHandle {
    fn identify_batch(&self, texts: &[&str]) -> Result<Vec<String>, LangIdError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let first = self.next_id.fetch_add(texts.len() as u64, Ordering::SeqCst);
        let requests: Vec<(u64, Value)> = texts
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let id = first + k as u64;
                (id, json!({"id": id, "text": t}))
            })
            .collect();
        let mut responses = self.conn.exchange(&requests, self.response_timeout)?;
        requests
            .iter()
            .map(|(id, _)| {
                let resp = responses.remove(id).expect("exchange answers every id");
                resp.get("lang")
                    .and_then(Value::as_str)
                    .map(str::to_string)
                    .ok_or_else(|| WireError::Protocol(format!("langid response without lang: {resp}")).into())
            })
            .collect()
    }
}

/// Percentage of selections whose identified language differs from `expected_lang`.
pub fn wrong_language_rate(
    selections: &[EnsembleSelection],
    identifier: &dyn LanguageIdentifier,
    expected_lang: &str,
) -> Result<f64, LangIdError> {
    if selections.is_empty() {
        return Err(LangIdError::Empty);
    }
    let texts: Vec<&str> = selections.iter().map(|s| s.chosen_text.as_str()).collect();
    let labels = identifier.identify_batch(&texts)?;
    let wrong = labels.iter().filter(|l| l.as_str() != expected_lang).count();
    Ok(100.0 * wrong as f64 / selections.len() as f64)
}
