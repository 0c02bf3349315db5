//! Smoothed sentence-level BLEU.
//!
//! Tokens are whitespace-delimited. Order-1 precision is unsmoothed; orders
//! `n >= 2` use add-one smoothing on both numerator and denominator. The
//! brevity penalty is `exp(1 - |ref| / |cand|)` for candidates shorter than
//! the reference.

use std::collections::HashMap;

pub const DEFAULT_MAX_ORDER: usize = 4;

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], u32> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU in `[0, 100]`.
///
/// # Panics
///
/// If `max_order == 0`.
pub fn sentence_bleu_with(candidate: &str, reference: &str, max_order: usize) -> f64 {
    assert!(max_order >= 1, "BLEU max_order must be >= 1");

    let cand: Vec<&str> = candidate.split_whitespace().collect();
    let refr: Vec<&str> = reference.split_whitespace().collect();
    if cand.is_empty() {
        return 0.0;
    }

    let mut log_sum = 0.0;
    for n in 1..=max_order {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts = ngram_counts(&refr, n);
        let matches: u32 = cand_counts
            .iter()
            .map(|(gram, &c)| c.min(*ref_counts.get(gram).unwrap_or(&0)))
            .sum();
        let total = cand.len().saturating_sub(n - 1) as f64;

        let precision = if n == 1 {
            if matches == 0 {
                return 0.0;
            }
            f64::from(matches) / total
        } else {
            (f64::from(matches) + 1.0) / (total + 1.0)
        };
        log_sum += precision.ln();
    }

    let geo_mean = (log_sum / max_order as f64).exp();
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let brevity = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    (100.0 * brevity * geo_mean).clamp(0.0, 100.0)
}

/// Sentence BLEU with up to 4-grams.
pub fn sentence_bleu(candidate: &str, reference: &str) -> f64 {
    sentence_bleu_with(candidate, reference, DEFAULT_MAX_ORDER)
}
