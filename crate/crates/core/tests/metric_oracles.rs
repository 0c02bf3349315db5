mod common;

use common::{bleu_oracle, chrf_oracle, chrf_oracle_with, random_text};
use mt_ensemble::metrics::{chrf, chrf_with, sentence_bleu};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn chrf_hand_checked() {
    // "catsat" vs "catsits": orders 1..6, computed by hand
    let p = [5.0 / 6.0, 3.0 / 5.0, 2.0 / 4.0, 1.0 / 3.0, 0.0, 0.0];
    let r = [5.0 / 7.0, 3.0 / 6.0, 2.0 / 5.0, 1.0 / 4.0, 0.0 / 3.0, 0.0 / 2.0];
    let (pm, rm) = (p.iter().sum::<f64>() / 6.0, r.iter().sum::<f64>() / 6.0);
    let expected = 5.0 * pm * rm / (4.0 * pm + rm);
    assert!((chrf("cat sat", "cat sits") - expected).abs() < 1e-12);
    assert!((chrf_oracle("cat sat", "cat sits") - expected).abs() < 1e-12);
}

#[test]
fn bleu_hand_checked() {
    // "the the cat" vs "the cat": unigram clipping gives 2/3, no brevity penalty
    let expected = 100.0 * (2.0f64 / 3.0 * (2.0 / 3.0) * (1.0 / 2.0) * (1.0 / 1.0)).powf(0.25);
    assert!((sentence_bleu("the the cat", "the cat") - expected).abs() < 1e-12);
    assert!((bleu_oracle("the the cat", "the cat") - expected).abs() < 1e-12);
    // shorter candidate gets exp(1 - 3/2)
    let short = 100.0 * (1.0f64 * (2.0 / 2.0) * (1.0 / 1.0) * (1.0 / 1.0)).powf(0.25) * (1.0f64 - 1.5).exp();
    assert!((sentence_bleu("the cat", "the cat sat") - short).abs() < 1e-12);
}

#[test]
fn identity_and_disjoint_exact() {
    assert_eq!(chrf("Das Haus ist klein.", "Das Haus ist klein."), 1.0);
    assert_eq!(chrf("", ""), 1.0);
    assert_eq!(chrf("abc", "xyz"), 0.0);
    assert_eq!(sentence_bleu("das Haus ist klein", "das Haus ist klein"), 100.0);
    assert_eq!(sentence_bleu("a b c", "x y z"), 0.0);
    assert_eq!(sentence_bleu("", "x y z"), 0.0);
}

#[test]
fn random_pairs_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let c = random_text(&mut rng, 8);
        let r = random_text(&mut rng, 8);
        let (got, want) = (chrf(&c, &r), chrf_oracle(&c, &r));
        assert!((got - want).abs() <= 1e-12, "chrf({c:?}, {r:?}) = {got}, oracle {want}");
        let (got, want) = (sentence_bleu(&c, &r), bleu_oracle(&c, &r));
        assert!((got - want).abs() <= 1e-12, "bleu({c:?}, {r:?}) = {got}, oracle {want}");
    }
}

#[test]
fn other_orders_and_betas_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..200 {
        let c = random_text(&mut rng, 6);
        let r = random_text(&mut rng, 6);
        let order = 1 + k % 8;
        let beta = [0.5, 1.0, 2.0, 3.0][k % 4];
        let (got, want) = (chrf_with(&c, &r, order, beta), chrf_oracle_with(&c, &r, order, beta));
        assert!((got - want).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn bounds_and_identity(c in "[a-dß ]{0,30}", r in "[a-dß ]{0,30}") {
        let f = chrf(&c, &r);
        prop_assert!((0.0..=1.0).contains(&f));
        let b = sentence_bleu(&c, &r);
        prop_assert!((0.0..=100.0).contains(&b));
        prop_assert_eq!(chrf(&c, &c), 1.0);
        if !c.trim().is_empty() {
            prop_assert!((sentence_bleu(&c, &c) - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn whitespace_is_ignored_by_chrf(c in "[a-d]{1,12}", r in "[a-d ]{1,12}") {
        let spaced: String = c.chars().flat_map(|ch| [ch, ' ']).collect();
        prop_assert_eq!(chrf(&spaced, &r), chrf(&c, &r));
    }

    #[test]
    fn unigram_chrf_symmetric_for_equal_lengths(c in "[a-e]{1,10}", seed in any::<u64>()) {
        // a permutation of a different multiset with equal length: P and R coincide per order
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r: String = (0..c.chars().count()).map(|_| (b'a' + rand::Rng::gen_range(&mut rng, 0..5u8)) as char).collect();
        let (a, b) = (chrf_with(&c, &r, 1, 2.0), chrf_with(&r, &c, 1, 2.0));
        prop_assert!((a - b).abs() < 1e-12);
    }
}
