mod common;

use common::osa_distance;
use mt_ensemble::robustness::{
    detect_hallucination, hallucination_rate, perturb, perturb_insert, perturb_misspell, perturb_titlecase,
    HallucinationVerdict, PerturbError, PerturbationKind, DEFAULT_CEILING, DEFAULT_GATE,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Titlecase written independently: split on whitespace runs, keep them verbatim.
fn titlecase_oracle(text: &str) -> String {
    let mut out = String::new();
    let mut prev_ws = true;
    for c in text.chars() {
        if prev_ws && !c.is_whitespace() {
            let up: Vec<char> = c.to_uppercase().collect();
            if up.len() == 1 {
                out.push(up[0]);
            } else {
                out.push(c);
            }
        } else {
            out.push(c);
        }
        prev_ws = c.is_whitespace();
    }
    out
}

#[test]
fn titlecase_examples() {
    assert_eq!(perturb_titlecase("the quick  brown\tfox"), "The Quick  Brown\tFox");
    assert_eq!(perturb_titlecase("ärger über ßpiel"), "Ärger Über ßpiel");
    assert_eq!(perturb_titlecase("ǆungla"), "Ǆungla");
    assert_eq!(perturb_titlecase(""), "");
}

#[test]
fn insert_frequencies_are_uniform() {
    let tokens: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
    let mut counts = [0usize; 10];
    for seed in 0..1000u64 {
        let out = perturb_insert("ein Satz", &tokens, seed).unwrap();
        let (first, rest) = out.split_once(' ').unwrap();
        assert_eq!(rest, "ein Satz");
        counts[tokens.iter().position(|t| t == first).unwrap()] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        let share = c as f64 / 1000.0;
        assert!((share - 0.1).abs() <= 0.05, "token {i} drawn {c} times");
    }
    assert_eq!(perturb_insert("x", &[], 1), Err(PerturbError::EmptyTokenList));
}

#[test]
fn misspell_rejects_texts_without_long_words() {
    assert_eq!(perturb_misspell("a b c", 3), Err(PerturbError::NoEligibleWord));
    assert_eq!(perturb_misspell("", 3), Err(PerturbError::NoEligibleWord));
    // a word of identical characters cannot be swapped but still changes
    for seed in 0..50 {
        let out = perturb_misspell("aa", seed).unwrap();
        assert!(out == "a" || out == "aaa", "{out}");
    }
}

#[test]
fn perturbations_are_pure() {
    let tokens = vec!["the".to_string(), "and".to_string()];
    for kind in [PerturbationKind::Misspell, PerturbationKind::Titlecase, PerturbationKind::Insert] {
        let a = perturb(kind, "a short sentence here", 99, &tokens).unwrap();
        let b = perturb(kind, "a short sentence here", 99, &tokens).unwrap();
        assert_eq!(a, b);
    }
    assert_eq!("insert".parse::<PerturbationKind>().unwrap(), PerturbationKind::Insert);
    assert!("shout".parse::<PerturbationKind>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn misspell_is_one_edit_in_one_word(text in "[a-zäöß]{1,7}( [a-zäöß]{1,7}){0,6}", seed in any::<u64>()) {
        match perturb_misspell(&text, seed) {
            Ok(out) => {
                prop_assert_eq!(osa_distance(&text, &out), 1);
                let before: Vec<&str> = text.split(' ').collect();
                let after: Vec<&str> = out.split(' ').collect();
                prop_assert_eq!(before.len(), after.len());
                let changed = before.iter().zip(&after).filter(|(a, b)| a != b).count();
                prop_assert_eq!(changed, 1);
            }
            Err(e) => {
                prop_assert_eq!(e, PerturbError::NoEligibleWord);
                prop_assert!(text.split(' ').all(|w| w.chars().count() < 2));
            }
        }
    }

    #[test]
    fn titlecase_matches_oracle_and_keeps_length(text in "\\PC{0,40}") {
        let out = perturb_titlecase(&text);
        prop_assert_eq!(&out, &titlecase_oracle(&text));
        prop_assert_eq!(out.chars().count(), text.chars().count());
        prop_assert_eq!(out.split_whitespace().count(), text.split_whitespace().count());
    }

    #[test]
    fn insert_adds_exactly_one_word(text in "[a-z]{1,6}( [a-z]{1,6}){0,5}", seed in any::<u64>()) {
        let tokens = vec!["und".to_string(), "die".to_string(), "der".to_string()];
        let out = perturb_insert(&text, &tokens, seed).unwrap();
        prop_assert_eq!(out.split_whitespace().count(), text.split_whitespace().count() + 1);
        prop_assert!(out.ends_with(&text));
    }

    #[test]
    fn hallucination_is_monotone(
        gate_bleu in 0.0f64..100.0,
        lo in 0.0f64..100.0,
        delta in 0.0f64..50.0,
    ) {
        // a worse perturbed score can only turn a clean verdict into a hallucination
        let better = detect_hallucination("s", gate_bleu, lo + delta, DEFAULT_GATE, DEFAULT_CEILING);
        let worse = detect_hallucination("s", gate_bleu, lo, DEFAULT_GATE, DEFAULT_CEILING);
        prop_assert!(!better.is_hallucination || worse.is_hallucination);
        prop_assert_eq!(better.passed_gate, worse.passed_gate);
        prop_assert!(!worse.is_hallucination || worse.passed_gate);
    }

    #[test]
    fn rate_ignores_order(pairs in prop::collection::vec((0.0f64..30.0, 0.0f64..30.0), 0..60), seed in any::<u64>()) {
        let verdicts: Vec<HallucinationVerdict> = pairs
            .iter()
            .map(|&(a, b)| detect_hallucination("s", a, b, DEFAULT_GATE, DEFAULT_CEILING))
            .collect();
        let mut shuffled = verdicts.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        prop_assert_eq!(hallucination_rate(&verdicts), hallucination_rate(&shuffled));
    }
}

#[test]
fn rate_matches_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let n = rng.gen_range(0..80);
        let pairs: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0))).collect();
        let verdicts: Vec<_> = pairs
            .iter()
            .map(|&(a, b)| detect_hallucination("s", a, b, DEFAULT_GATE, DEFAULT_CEILING))
            .collect();
        let gated = pairs.iter().filter(|p| p.0 > 9.0).count();
        let bad = pairs.iter().filter(|p| p.0 > 9.0 && p.1 < 3.0).count();
        let r = hallucination_rate(&verdicts);
        assert_eq!((r.passed_gate, r.hallucinations), (gated, bad));
        assert_eq!(r.empty_denominator, gated == 0);
        if gated > 0 {
            assert!((r.percent - 100.0 * bad as f64 / gated as f64).abs() < 1e-12);
        } else {
            assert_eq!(r.percent, 0.0);
        }
    }
}
