//! Turning endpoint strings into backends, scorers and identifiers.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use crate::data::{load_records, SourceSegment};
use crate::genkit::{CompletionBackend, EchoBackend, FixedBackend, HttpBackend, NoisyCopyBackend};
use crate::metrics::{scorer_connect, Chrf, SentenceBleu, Utility};
use crate::robustness::{LangIdHandle, LanguageIdentifier};
use crate::wire::{Endpoint, DEFAULT_HANDSHAKE_TIMEOUT};

/// Default per-word corruption scale of the `stub:noisy` backend.
pub const DEFAULT_NOISE_SCALE: f64 = 0.5;

/// External collaborators a subcommand may need. Unbound roles are `None`.
#[derive(Clone, Default)]
pub struct Services {
    pub backend: Option<Arc<dyn CompletionBackend>>,
    pub utility: Option<Arc<dyn Utility>>,
    pub qe: Option<Arc<dyn Utility>>,
    pub metric: Option<Arc<dyn Utility>>,
    pub langid: Option<Arc<dyn LanguageIdentifier>>,
}

fn bound<'a, T: ?Sized>(slot: &'a Option<Arc<T>>, role: &str) -> Result<&'a T> {
    slot.as_deref().ok_or_else(|| anyhow!("no {role} is configured"))
}

impl Services {
    pub fn backend(&self) -> Result<&dyn CompletionBackend> {
        bound(&self.backend, "completion backend")
    }
    pub fn utility(&self) -> Result<&dyn Utility> {
        bound(&self.utility, "MBR utility")
    }
    pub fn qe(&self) -> Result<&dyn Utility> {
        bound(&self.qe, "QE scorer")
    }
    pub fn metric(&self) -> Result<&dyn Utility> {
        bound(&self.metric, "oracle metric")
    }
    pub fn langid(&self) -> Result<&dyn LanguageIdentifier> {
        bound(&self.langid, "language identifier")
    }
}

/// Builds a completion backend.
///
/// `stub:noisy` copies references from `segments` (segments without one are
/// skipped) and is seeded with `seed`.
pub fn resolve_backend(spec: &str, seed: u64, segments: &[SourceSegment]) -> Result<Arc<dyn CompletionBackend>> {
    if spec.starts_with("http://") || spec.starts_with("https://") {
        return Ok(Arc::new(HttpBackend::new(spec)?));
    }
    let Some(stub) = spec.strip_prefix("stub:") else {
        bail!("unknown backend `{spec}`");
    };
    let (kind, arg) = stub.split_once('=').map_or((stub, None), |(k, a)| (k, Some(a)));
    Ok(match (kind, arg) {
        ("echo", None) => Arc::new(EchoBackend),
        ("fixed", Some(text)) => Arc::new(FixedBackend::counting(text)),
        ("noisy", scale) => {
            let scale = match scale {
                Some(s) => s.parse().with_context(|| format!("bad noise scale in `{spec}`"))?,
                None => DEFAULT_NOISE_SCALE,
            };
            let pairs = segments
                .iter()
                .filter_map(|s| Some((s.text.clone(), s.reference.clone()?)))
                .collect();
            Arc::new(NoisyCopyBackend::new(pairs, scale, seed))
        }
        _ => bail!("unknown stub backend `{spec}`"),
    })
}

#[derive(Deserialize)]
struct TableEntry {
    mt: String,
    score: f64,
}

/// Builds a utility or scorer: `chrf`, `bleu`, `stub:chrf`,
/// `stub:qe-table=<jsonl>`, `cmd:<command>` or `tcp:<host:port>`.
pub fn resolve_utility(spec: &str) -> Result<Arc<dyn Utility>> {
    match spec {
        "chrf" => return Ok(Arc::new(Chrf::default())),
        "bleu" => return Ok(Arc::new(SentenceBleu::default())),
        _ => {}
    }
    if let Some(stub) = spec.strip_prefix("stub:") {
        return stub_utility(stub, spec);
    }
    let endpoint: Endpoint = spec.parse()?;
    let handle = scorer_connect(&endpoint, DEFAULT_HANDSHAKE_TIMEOUT).with_context(|| format!("connecting to `{spec}`"))?;
    Ok(Arc::new(handle))
}

#[cfg(unix)]
fn stub_utility(stub: &str, spec: &str) -> Result<Arc<dyn Utility>> {
    use crate::stub::StubScorer;
    let scorer = if stub == "chrf" {
        StubScorer::chrf()
    } else if let Some(path) = stub.strip_prefix("qe-table=") {
        let rows: Vec<TableEntry> = load_records(Path::new(path))?;
        let table: HashMap<String, f64> = rows.into_iter().map(|r| (r.mt, r.score)).collect();
        StubScorer::table(table)
    } else {
        bail!("unknown stub scorer `{spec}`");
    };
    Ok(Arc::new(scorer.connect()?.0))
}

#[cfg(not(unix))]
fn stub_utility(_stub: &str, spec: &str) -> Result<Arc<dyn Utility>> {
    bail!("stub scorer `{spec}` needs a Unix platform")
}

/// Builds a language identifier: `stub:script[=<latin>,<cyrillic>]`,
/// `stub:const=<code>`, `cmd:<command>` or `tcp:<host:port>`.
pub fn resolve_langid(spec: &str) -> Result<Arc<dyn LanguageIdentifier>> {
    if let Some(stub) = spec.strip_prefix("stub:") {
        return stub_langid(stub, spec);
    }
    let endpoint: Endpoint = spec.parse()?;
    let handle =
        LangIdHandle::connect(&endpoint, DEFAULT_HANDSHAKE_TIMEOUT).with_context(|| format!("connecting to `{spec}`"))?;
    Ok(Arc::new(handle))
}

#[cfg(unix)]
fn stub_langid(stub: &str, spec: &str) -> Result<Arc<dyn LanguageIdentifier>> {
    use crate::stub::StubLangId;
    let id = if stub == "script" {
        StubLangId::script()
    } else if let Some(codes) = stub.strip_prefix("script=") {
        let (latin, cyrillic) = codes
            .split_once(',')
            .ok_or_else(|| anyhow!("expected `stub:script=<latin>,<cyrillic>`, got `{spec}`"))?;
        StubLangId::Script {
            latin: latin.into(),
            cyrillic: cyrillic.into(),
        }
    } else if let Some(code) = stub.strip_prefix("const=") {
        StubLangId::Constant(code.into())
    } else {
        bail!("unknown stub language identifier `{spec}`");
    };
    Ok(Arc::new(id.connect()?.0))
}

#[cfg(not(unix))]
fn stub_langid(_stub: &str, spec: &str) -> Result<Arc<dyn LanguageIdentifier>> {
    bail!("stub language identifier `{spec}` needs a Unix platform")
}
