//! Character n-gram F-score.

use std::collections::HashMap;

pub const DEFAULT_MAX_ORDER: usize = 6;
pub const DEFAULT_BETA: f64 = 2.0;

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], u32> {
    let mut counts = HashMap::new();
    if chars.len() >= n {
        for gram in chars.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn strip_whitespace(s: &str) -> Vec<char> {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

/// chrF between `candidate` and `reference`, in `[0, 1]`.
///
/// Whitespace is removed from both strings before n-gram extraction.
/// Precision and recall are averaged arithmetically over the orders
/// `1..=max_order` for which either string has at least one n-gram; two
/// strings with no n-grams at all (both empty) score 1.
///
/// # Panics
///
/// If `max_order == 0` or `beta <= 0`.
pub fn chrf_with(candidate: &str, reference: &str, max_order: usize, beta: f64) -> f64 {
    assert!(max_order >= 1, "chrF max_order must be >= 1");
    assert!(beta > 0.0, "chrF beta must be > 0");

    let cand = strip_whitespace(candidate);
    let refr = strip_whitespace(reference);

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut effective_orders = 0usize;

    for n in 1..=max_order {
        let cand_total = cand.len().saturating_sub(n - 1);
        let ref_total = refr.len().saturating_sub(n - 1);
        if cand_total == 0 && ref_total == 0 {
            continue;
        }
        effective_orders += 1;

        let cand_counts = char_ngrams(&cand, n);
        let ref_counts = char_ngrams(&refr, n);
        let matches: u32 = cand_counts
            .iter()
            .map(|(gram, &c)| c.min(*ref_counts.get(gram).unwrap_or(&0)))
            .sum();

        if cand_total > 0 {
            precision_sum += f64::from(matches) / cand_total as f64;
        }
        if ref_total > 0 {
            recall_sum += f64::from(matches) / ref_total as f64;
        }
    }

    if effective_orders == 0 {
        return 1.0;
    }

    let precision = precision_sum / effective_orders as f64;
    let recall = recall_sum / effective_orders as f64;
    if precision + recall == 0.0 {
        return 0.0;
    }
    let beta2 = beta * beta;
    let score = (1.0 + beta2) * precision * recall / (beta2 * precision + recall);
    score.clamp(0.0, 1.0)
}

/// chrF with the default order 6 and beta 2.
pub fn chrf(candidate: &str, reference: &str) -> f64 {
    chrf_with(candidate, reference, DEFAULT_MAX_ORDER, DEFAULT_BETA)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_one() {
        assert_eq!(chrf("Hallo Welt", "Hallo Welt"), 1.0);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(chrf("aaaa", "bbbb"), 0.0);
    }

    #[test]
    fn empty_strings() {
        assert_eq!(chrf("", ""), 1.0);
        assert_eq!(chrf("   ", "\t"), 1.0);
        assert_eq!(chrf("abc", ""), 0.0);
        assert_eq!(chrf("", "abc"), 0.0);
    }

    #[test]
    fn whitespace_is_ignored() {
        assert_eq!(chrf("Hallo Welt", "HalloWelt"), 1.0);
    }

    #[test]
    fn short_strings_only_use_attainable_orders() {
        // single characters only have unigrams; higher orders are skipped
        assert_eq!(chrf("a", "a"), 1.0);
    }

    #[test]
    fn asymmetric_in_general() {
        let a = chrf("cat sat", "cat sits");
        let b = chrf("cat sits", "cat sat");
        assert!((a - b).abs() > 1e-6);
    }

    #[test]
    #[should_panic]
    fn zero_order_panics() {
        chrf_with("a", "a", 0, 2.0);
    }
}
