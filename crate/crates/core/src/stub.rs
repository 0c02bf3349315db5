//! In-process stand-ins for out-of-process scorers and language identifiers.
//!
//! Each stub runs on a background thread and talks to its client over a
//! Unix socket pair using the real line protocol, so tests and offline runs
//! exercise the full wire path. Stubs are for tests and desk-scale
//! experiments only; the script-based language identifier in particular is
//! not a production classifier.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::os::unix::net::UnixStream;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use crate::metrics::{chrf, ScorerHandle, SCORER_PROTOCOL};
use crate::robustness::langid::{LangIdHandle, LANGID_PROTOCOL};
use crate::wire::{LineConnection, WireError};

/// How a stub orders its replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplyOrder {
    /// Answer each request as soon as it is read.
    Immediate,
    /// Buffer up to `k` requests, then answer them last-to-first.
    ReverseChunks(usize),
}

/// Shared count of requests a stub has received.
#[derive(Debug, Clone, Default)]
pub struct CallCounter(Arc<AtomicUsize>);

impl CallCounter {
    pub fn get(&self) -> usize {
        self.0.load(Ordering::SeqCst)
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
    }
}

type Handler = Box<dyn FnMut(&Value) -> Value + Send>;

/// Serves a line protocol: one handshake line, then one response per request.
///
/// Returns when the reader hits EOF. Requests that are not JSON objects with
/// an integer `id` are skipped. Buffered replies are always flushed before
/// the server would block waiting for more input, so a client never waits on
/// a reply held back for a chunk that cannot fill up.
pub fn serve<R: Read, W: Write>(
    mut reader: BufReader<R>,
    mut writer: W,
    handshake: &Value,
    order: ReplyOrder,
    counter: &CallCounter,
    mut handler: Handler,
) -> std::io::Result<()> {
    writeln!(writer, "{handshake}")?;
    writer.flush()?;
    let mut pending: Vec<Value> = Vec::new();
    let flush = |pending: &mut Vec<Value>, writer: &mut W| -> std::io::Result<()> {
        for r in pending.drain(..).rev() {
            writeln!(writer, "{r}")?;
        }
        writer.flush()
    };
    loop {
        if !pending.is_empty() && reader.buffer().is_empty() {
            flush(&mut pending, &mut writer)?;
        }
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let Ok(req) = serde_json::from_str::<Value>(&line) else {
            continue;
        };
        if req.get("id").and_then(Value::as_u64).is_none() {
            continue;
        }
        counter.bump();
        let resp = handler(&req);
        match order {
            ReplyOrder::Immediate => {
                writeln!(writer, "{resp}")?;
                writer.flush()?;
            }
            ReplyOrder::ReverseChunks(k) => {
                pending.push(resp);
                if pending.len() >= k.max(1) {
                    flush(&mut pending, &mut writer)?;
                }
            }
        }
    }
    flush(&mut pending, &mut writer)
}

fn spawn_service(
    handshake: Value,
    order: ReplyOrder,
    handler: Handler,
) -> Result<(LineConnection, CallCounter), WireError> {
    let (client, server) = UnixStream::pair()?;
    let counter = CallCounter::default();
    let server_counter = counter.clone();
    let reader = BufReader::new(server.try_clone()?);
    thread::spawn(move || {
        let _ = serve(reader, server, &handshake, order, &server_counter, handler);
    });
    Ok((LineConnection::from_unix(client)?, counter))
}

/// Scoring behaviour of a stub scorer.
pub enum StubMetric {
    /// chrF of `mt` against `ref`; declares `needs_reference = true`.
    Chrf,
    /// Reference-free lookup of `mt` in a table; unknown strings score 0.
    Table(HashMap<String, f64>),
    /// Arbitrary reference-free scoring function.
    Function(Box<dyn Fn(&str, &str) -> f64 + Send>),
}

pub struct StubScorer {
    pub name: String,
    pub protocol: String,
    pub metric: StubMetric,
    pub order: ReplyOrder,
}

impl StubScorer {
    pub fn new(name: &str, metric: StubMetric) -> Self {
        StubScorer {
            name: name.to_string(),
            protocol: SCORER_PROTOCOL.to_string(),
            metric,
            order: ReplyOrder::Immediate,
        }
    }

    pub fn chrf() -> Self {
        Self::new("stub-chrf", StubMetric::Chrf)
    }

    pub fn table(scores: HashMap<String, f64>) -> Self {
        Self::new("stub-qe", StubMetric::Table(scores))
    }

    pub fn with_order(mut self, order: ReplyOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_protocol(mut self, protocol: &str) -> Self {
        self.protocol = protocol.to_string();
        self
    }

    fn needs_reference(&self) -> bool {
        matches!(self.metric, StubMetric::Chrf)
    }

    /// Starts the stub and returns the raw client connection.
    pub fn spawn(self) -> Result<(LineConnection, CallCounter), WireError> {
        let handshake = json!({
            "protocol": self.protocol,
            "name": self.name,
            "needs_reference": self.needs_reference(),
        });
        let metric = self.metric;
        let handler: Handler = Box::new(move |req| {
            let field = |k: &str| req.get(k).and_then(Value::as_str).unwrap_or("");
            let score = match &metric {
                StubMetric::Chrf => chrf(field("mt"), field("ref")),
                StubMetric::Table(t) => t.get(field("mt")).copied().unwrap_or(0.0),
                StubMetric::Function(f) => f(field("src"), field("mt")),
            };
            json!({"id": req["id"], "score": score})
        });
        spawn_service(handshake, self.order, handler)
    }

    /// Starts the stub and completes the client handshake.
    pub fn connect(self) -> Result<(ScorerHandle, CallCounter), WireError> {
        let (conn, counter) = self.spawn()?;
        let handle = ScorerHandle::handshake(conn, Duration::from_secs(5))?;
        Ok((handle, counter))
    }
}

/// Labelling behaviour of a stub language identifier.
pub enum StubLangId {
    /// Every text gets the same code.
    Constant(String),
    /// Exact-match lookup; unknown texts are labelled `und`.
    Table(HashMap<String, String>),
    /// Majority script of the letters: Latin and Cyrillic map to the given
    /// codes, Greek to `el`, Han to `zh`, anything else to `und`.
    Script { latin: String, cyrillic: String },
}

impl StubLangId {
    pub fn script() -> Self {
        StubLangId::Script {
            latin: "en".into(),
            cyrillic: "ru".into(),
        }
    }

    pub fn label(&self, text: &str) -> String {
        match self {
            StubLangId::Constant(code) => code.clone(),
            StubLangId::Table(t) => t.get(text).cloned().unwrap_or_else(|| "und".into()),
            StubLangId::Script { latin, cyrillic } => {
                let mut counts = [0usize; 4];
                for c in text.chars().filter(|c| c.is_alphabetic()) {
                    match c as u32 {
                        0x0041..=0x024F => counts[0] += 1,
                        0x0400..=0x052F => counts[1] += 1,
                        0x0370..=0x03FF => counts[2] += 1,
                        0x4E00..=0x9FFF => counts[3] += 1,
                        _ => {}
                    }
                }
                let (best, &n) = counts
                    .iter()
                    .enumerate()
                    .max_by_key(|&(i, n)| (*n, std::cmp::Reverse(i)))
                    .expect("four scripts");
                if n == 0 {
                    return "und".into();
                }
                match best {
                    0 => latin.clone(),
                    1 => cyrillic.clone(),
                    2 => "el".into(),
                    _ => "zh".into(),
                }
            }
        }
    }

    pub fn connect(self) -> Result<(LangIdHandle, CallCounter), WireError> {
        let handshake = json!({"protocol": LANGID_PROTOCOL, "name": "stub-langid"});
        let handler: Handler = Box::new(move |req| {
            let text = req.get("text").and_then(Value::as_str).unwrap_or("");
            json!({"id": req["id"], "lang": self.label(text)})
        });
        let (conn, counter) = spawn_service(handshake, ReplyOrder::Immediate, handler)?;
        let handle = LangIdHandle::handshake(conn, Duration::from_secs(5))?;
        Ok((handle, counter))
    }
}
