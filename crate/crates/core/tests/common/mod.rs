//! Independent reference implementations used as test oracles.
//!
//! These are written for clarity rather than speed: n-grams are enumerated
//! as owned strings and counted by linear scans, and MBR is evaluated
//! literally from its definition.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;

/// Multiset intersection size of two lists by linear scan.
fn clipped_matches(cand: &[String], reference: &[String]) -> usize {
    let mut used = vec![false; reference.len()];
    let mut matches = 0;
    for g in cand {
        if let Some(k) = (0..reference.len()).find(|&k| !used[k] && &reference[k] == g) {
            used[k] = true;
            matches += 1;
        }
    }
    matches
}

fn char_grams(s: &str, n: usize) -> Vec<String> {
    let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start + n <= chars.len() {
        out.push(chars[start..start + n].iter().collect());
        start += 1;
    }
    out
}

fn word_grams(s: &str, n: usize) -> Vec<String> {
    let words: Vec<&str> = s.split_whitespace().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start + n <= words.len() {
        out.push(words[start..start + n].join("\u{1}"));
        start += 1;
    }
    out
}

pub fn chrf_oracle(cand: &str, reference: &str) -> f64 {
    chrf_oracle_with(cand, reference, 6, 2.0)
}

pub fn chrf_oracle_with(cand: &str, reference: &str, max_order: usize, beta: f64) -> f64 {
    let mut ps = Vec::new();
    let mut rs = Vec::new();
    for n in 1..=max_order {
        let c = char_grams(cand, n);
        let r = char_grams(reference, n);
        if c.is_empty() && r.is_empty() {
            continue;
        }
        let m = clipped_matches(&c, &r) as f64;
        ps.push(if c.is_empty() { 0.0 } else { m / c.len() as f64 });
        rs.push(if r.is_empty() { 0.0 } else { m / r.len() as f64 });
    }
    if ps.is_empty() {
        return 1.0;
    }
    let p = ps.iter().sum::<f64>() / ps.len() as f64;
    let r = rs.iter().sum::<f64>() / rs.len() as f64;
    if p + r == 0.0 {
        return 0.0;
    }
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (b2 * p + r)
}

pub fn bleu_oracle(cand: &str, reference: &str) -> f64 {
    let c_len = cand.split_whitespace().count();
    let r_len = reference.split_whitespace().count();
    if c_len == 0 {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=4 {
        let c = word_grams(cand, n);
        let r = word_grams(reference, n);
        let m = clipped_matches(&c, &r) as f64;
        let p = if n == 1 {
            m / c.len() as f64
        } else {
            (m + 1.0) / (c.len() as f64 + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        product *= p;
    }
    let bp = if c_len < r_len {
        (1.0 - r_len as f64 / c_len as f64).exp()
    } else {
        1.0
    };
    100.0 * bp * product.powf(0.25)
}

/// MBR straight from the definition: expected utility of each candidate
/// against every pseudo-reference with uniform weight `1/N`, then the first
/// candidate whose expectation is not beaten.
pub fn exhaustive_mbr(rows: &[Vec<f64>]) -> usize {
    let n = rows.len();
    let weight = 1.0 / n as f64;
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (cand, row) in rows.iter().enumerate() {
        let mut expected = 0.0;
        for u in row {
            expected += weight * u;
        }
        if expected > best_value {
            best = cand;
            best_value = expected;
        }
    }
    best
}

/// First index of the largest value by a plain scan.
pub fn scan_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

/// Random text over a small alphabet so n-grams collide often.
pub fn random_text<R: Rng>(rng: &mut R, max_words: usize) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'c', 'd', 'e', 'ä', 'ß', 'x', 'y'];
    let words = rng.gen_range(0..=max_words);
    (0..words)
        .map(|_| {
            let len = rng.gen_range(1..=5);
            (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect::<String>()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Writes `lines` as a file under `dir` and returns its path.
pub fn write_file(dir: &Path, name: &str, lines: &[String]) -> PathBuf {
    let path = dir.join(name);
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    std::fs::write(&path, body).unwrap();
    path
}

pub fn segment_line(id: &str, text: &str, reference: Option<&str>) -> String {
    let mut v = serde_json::json!({"id": id, "src_lang": "en", "tgt_lang": "de", "text": text});
    if let Some(r) = reference {
        v["reference"] = r.into();
    }
    v.to_string()
}

/// Optimal string alignment distance (adjacent transpositions count once).
pub fn osa_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut v = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                v = v.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = v;
        }
    }
    d[a.len()][b.len()]
}
