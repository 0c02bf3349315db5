//! Domain records and line-oriented JSON corpus I/O.
//!
//! Every file handled here is UTF-8 with one JSON object per `\n`-terminated
//! line. Loaders reject the whole file on the first bad line and report its
//! 1-based line number. Unknown fields are ignored on read.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Line number the error refers to, when it refers to one.
    pub fn line(&self) -> Option<usize> {
        match self {
            DataError::Malformed { line, .. }
            | DataError::MissingField { line, .. }
            | DataError::DuplicateId { line, .. }
            | DataError::Invalid { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// One source sentence to translate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSegment {
    pub id: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

impl SourceSegment {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("segment id is empty".into());
        }
        if self.src_lang == self.tgt_lang {
            return Err(format!(
                "src_lang and tgt_lang are both `{}`",
                self.src_lang
            ));
        }
        if self.text.trim().is_empty() {
            return Err(format!("segment `{}` has empty text", self.id));
        }
        Ok(())
    }
}

/// A single candidate translation with the sampling parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    pub template_id: String,
    pub temperature: f64,
    pub top_p: f64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Hypothesis {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(format!("temperature {} is not >= 0", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(format!("top_p {} is not in (0, 1]", self.top_p));
        }
        Ok(())
    }
}

/// The candidates for one segment, in generation order.
///
/// Index `i` denotes the same hypothesis in every module: matrices,
/// selections and diagnostics all refer back to this ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    pub segment_id: String,
    pub hypotheses: Vec<Hypothesis>,
}

impl HypothesisSet {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.hypotheses.iter().map(|h| h.text.as_str()).collect()
    }

    pub fn text(&self, index: usize) -> Option<&str> {
        self.hypotheses.get(index).map(|h| h.text.as_str())
    }

    /// Appends the hypotheses of `other` (multi-prompt ensembling).
    pub fn extend(&mut self, other: HypothesisSet) {
        self.hypotheses.extend(other.hypotheses);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    Sample,
    Mbr,
    Rank,
    Oracle,
    ChooseBest,
    GenerateBest,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Greedy,
        Method::Sample,
        Method::Mbr,
        Method::Rank,
        Method::Oracle,
        Method::ChooseBest,
        Method::GenerateBest,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Sample => "sample",
            Method::Mbr => "mbr",
            Method::Rank => "rank",
            Method::Oracle => "oracle",
            Method::ChooseBest => "choose_best",
            Method::GenerateBest => "generate_best",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// The final output chosen for one segment.
///
/// Serialized field order is fixed: segment_id, method, chosen_index,
/// chosen_text, score, diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSelection {
    pub segment_id: String,
    pub method: Method,
    #[serde(default)]
    pub chosen_index: Option<usize>,
    pub chosen_text: String,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub diagnostics: IndexMap<String, f64>,
}

impl EnsembleSelection {
    /// Checks that `chosen_index`, when present, points at `chosen_text` in `hyps`.
    pub fn consistent_with(&self, hyps: &HypothesisSet) -> bool {
        match self.chosen_index {
            Some(i) => hyps.text(i) == Some(self.chosen_text.as_str()),
            None => true,
        }
    }
}

fn parse_object(line_no: usize, line: &str) -> Result<serde_json::Map<String, serde_json::Value>, DataError> {
    match serde_json::from_str::<serde_json::Value>(line) {
        Ok(serde_json::Value::Object(map)) => Ok(map),
        Ok(_) => Err(DataError::Malformed {
            line: line_no,
            message: "expected a JSON object".into(),
        }),
        Err(e) => Err(DataError::Malformed {
            line: line_no,
            message: e.to_string(),
        }),
    }
}

fn decode<T: DeserializeOwned>(
    line_no: usize,
    line: &str,
    required: &[&'static str],
) -> Result<T, DataError> {
    let map = parse_object(line_no, line)?;
    if let Some(field) = required.iter().find(|f| !map.contains_key(**f)) {
        return Err(DataError::MissingField {
            line: line_no,
            field,
        });
    }
    serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| DataError::Invalid {
        line: line_no,
        reason: e.to_string(),
    })
}

fn read_lines(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

/// Iterates `(1-based line number, line)` pairs of a JSONL document.
fn numbered_lines(body: &str) -> impl Iterator<Item = (usize, &str)> {
    body.lines().enumerate().map(|(i, l)| (i + 1, l))
}

pub fn parse_segments(body: &str) -> Result<Vec<SourceSegment>, DataError> {
    const REQUIRED: &[&str] = &["id", "src_lang", "tgt_lang", "text"];
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line_no, line) in numbered_lines(body) {
        let seg: SourceSegment = decode(line_no, line, REQUIRED)?;
        seg.validate().map_err(|reason| DataError::Invalid {
            line: line_no,
            reason,
        })?;
        if !seen.insert(seg.id.clone()) {
            return Err(DataError::DuplicateId {
                line: line_no,
                id: seg.id,
            });
        }
        out.push(seg);
    }
    Ok(out)
}

pub fn load_segments(path: impl AsRef<Path>) -> Result<Vec<SourceSegment>, DataError> {
    parse_segments(&read_lines(path.as_ref())?)
}

pub fn parse_hypothesis_sets(body: &str) -> Result<Vec<HypothesisSet>, DataError> {
    const REQUIRED: &[&str] = &["segment_id", "hypotheses"];
    numbered_lines(body)
        .map(|(line_no, line)| {
            let set: HypothesisSet = decode(line_no, line, REQUIRED)?;
            if set.hypotheses.is_empty() {
                return Err(DataError::Invalid {
                    line: line_no,
                    reason: format!("segment `{}` has an empty hypothesis array", set.segment_id),
                });
            }
            for h in &set.hypotheses {
                h.validate().map_err(|reason| DataError::Invalid {
                    line: line_no,
                    reason,
                })?;
            }
            Ok(set)
        })
        .collect()
}

pub fn load_hypothesis_sets(path: impl AsRef<Path>) -> Result<Vec<HypothesisSet>, DataError> {
    parse_hypothesis_sets(&read_lines(path.as_ref())?)
}

pub fn parse_selections(body: &str) -> Result<Vec<EnsembleSelection>, DataError> {
    const REQUIRED: &[&str] = &["segment_id", "method", "chosen_text"];
    numbered_lines(body)
        .map(|(line_no, line)| decode(line_no, line, REQUIRED))
        .collect()
}

pub fn load_selections(path: impl AsRef<Path>) -> Result<Vec<EnsembleSelection>, DataError> {
    parse_selections(&read_lines(path.as_ref())?)
}

/// Loads any JSONL file of records of type `T` without domain validation.
pub fn load_records<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, DataError> {
    let body = read_lines(path.as_ref())?;
    numbered_lines(&body)
        .map(|(line_no, line)| decode(line_no, line, &[]))
        .collect()
}

/// Writes `records` as JSONL to `path` atomically.
///
/// Output goes to a temporary file in the destination directory and is
/// renamed into place only after every record serialized and the data hit
/// disk. On any failure the destination is left untouched.
pub fn write_jsonl<T, I>(path: impl AsRef<Path>, records: I) -> Result<(), DataError>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    write_atomic(path.as_ref(), |w| {
        for rec in records {
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n").map_err(serde_json::Error::io)?;
        }
        Ok(())
    })
}

pub fn write_segments(path: impl AsRef<Path>, segments: &[SourceSegment]) -> Result<(), DataError> {
    write_jsonl(path, segments)
}

pub fn write_hypothesis_sets(path: impl AsRef<Path>, sets: &[HypothesisSet]) -> Result<(), DataError> {
    write_jsonl(path, sets)
}

pub fn write_selections(path: impl AsRef<Path>, selections: &[EnsembleSelection]) -> Result<(), DataError> {
    write_jsonl(path, selections)
}

/// Runs `body` against a buffered temp file and renames it onto `path` on success.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<(), DataError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), serde_json::Error>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DataError::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(|e| DataError::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| DataError::io(path, e))?;
    tmp.persist(path).map_err(|e| DataError::io(path, e.error))?;
    Ok(())
}
