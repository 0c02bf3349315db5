//! Minimal source perturbations.
//!
//! All randomness comes from [`mix64`](crate::seed::mix64) chained on the
//! caller's seed, so `(text, seed)` fully determines the output on every
//! platform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::mix64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PerturbError {
    #[error("frequent-token list is empty")]
    EmptyTokenList,
    #[error("no word of two or more characters to misspell")]
    NoEligibleWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Misspell,
    Titlecase,
    Insert,
}

impl std::str::FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "misspell" => Ok(PerturbationKind::Misspell),
            "titlecase" => Ok(PerturbationKind::Titlecase),
            "insert" => Ok(PerturbationKind::Insert),
            other => Err(format!("unknown perturbation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub segment_id: String,
    pub kind: PerturbationKind,
    pub original: String,
    pub perturbed: String,
    pub seed: u64,
}

/// Byte ranges of whitespace-delimited words.
fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

/// Uppercases the first character of every word, leaving the rest alone.
///
/// Characters whose uppercase form is more than one character (e.g. `ß`)
/// are kept as they are so the character count never changes.
pub fn perturb_titlecase(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut at_word_start = true;
    for c in text.chars() {
        if c.is_whitespace() {
            at_word_start = true;
            out.push(c);
            continue;
        }
        if at_word_start {
            let mut upper = c.to_uppercase();
            match (upper.next(), upper.next()) {
                (Some(u), None) => out.push(u),
                _ => out.push(c),
            }
        } else {
            out.push(c);
        }
        at_word_start = false;
    }
    out
}

/// Prepends one frequent token chosen by `mix64(seed)`.
pub fn perturb_insert(text: &str, frequent_tokens: &[String], seed: u64) -> Result<String, PerturbError> {
    if frequent_tokens.is_empty() {
        return Err(PerturbError::EmptyTokenList);
    }
    let token = &frequent_tokens[(mix64(seed) % frequent_tokens.len() as u64) as usize];
    Ok(format!("{token} {text}"))
}

/// Applies one character edit to one word of length >= 2.
///
/// The word is picked by `h1 = mix64(seed)`, the edit by `h2 = mix64(h1)`
/// (swap adjacent characters, delete one, or duplicate one) and the
/// position by `h3 = mix64(h2)`. A swap is only made between two different
/// characters; a word with none falls back to deletion. The result is
/// always at edit distance exactly 1 (a transposition counts as one edit).
pub fn perturb_misspell(text: &str, seed: u64) -> Result<String, PerturbError> {
    let eligible: Vec<(usize, usize)> = word_spans(text)
        .into_iter()
        .filter(|&(s, e)| text[s..e].chars().count() >= 2)
        .collect();
    if eligible.is_empty() {
        return Err(PerturbError::NoEligibleWord);
    }
    let h1 = mix64(seed);
    let h2 = mix64(h1);
    let h3 = mix64(h2);
    let (start, end) = eligible[(h1 % eligible.len() as u64) as usize];
    let mut chars: Vec<char> = text[start..end].chars().collect();

    let swappable: Vec<usize> = (0..chars.len() - 1).filter(|&i| chars[i] != chars[i + 1]).collect();
    let mut op = h2 % 3;
    if op == 0 && swappable.is_empty() {
        op = 1;
    }
    match op {
        0 => {
            let i = swappable[(h3 % swappable.len() as u64) as usize];
            chars.swap(i, i + 1);
        }
        1 => {
            chars.remove((h3 % chars.len() as u64) as usize);
        }
        _ => {
            let i = (h3 % chars.len() as u64) as usize;
            chars.insert(i, chars[i]);
        }
    }

    let mut out = String::with_capacity(text.len() + 4);
    out.push_str(&text[..start]);
    out.extend(chars);
    out.push_str(&text[end..]);
    Ok(out)
}

/// Applies `kind` to `text`.
pub fn perturb(
    kind: PerturbationKind,
    text: &str,
    seed: u64,
    frequent_tokens: &[String],
) -> Result<String, PerturbError> {
    match kind {
        PerturbationKind::Misspell => perturb_misspell(text, seed),
        PerturbationKind::Titlecase => Ok(perturb_titlecase(text)),
        PerturbationKind::Insert => perturb_insert(text, frequent_tokens, seed),
    }
}
