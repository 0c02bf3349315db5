//! Hallucination under perturbation.
//!
//! A segment is gated in when its unperturbed translation scores strictly
//! above `gate` BLEU; it counts as a hallucination when, in addition, the
//! translation of the perturbed source scores strictly below `ceiling`.

use serde::{Deserialize, Serialize};

pub const DEFAULT_GATE: f64 = 9.0;
pub const DEFAULT_CEILING: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallucinationVerdict {
    pub segment_id: String,
    pub gate_bleu: f64,
    pub perturbed_bleu: f64,
    pub passed_gate: bool,
    pub is_hallucination: bool,
}

pub fn detect_hallucination(
    segment_id: &str,
    unperturbed_bleu: f64,
    perturbed_bleu: f64,
    gate: f64,
    ceiling: f64,
) -> HallucinationVerdict {
    let passed_gate = unperturbed_bleu > gate;
    HallucinationVerdict {
        segment_id: segment_id.to_string(),
        gate_bleu: unperturbed_bleu,
        perturbed_bleu,
        passed_gate,
        is_hallucination: passed_gate && perturbed_bleu < ceiling,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HallucinationRate {
    /// Percentage of gated-in segments that hallucinated.
    pub percent: f64,
    pub passed_gate: usize,
    pub hallucinations: usize,
    /// Set when no segment passed the gate; `percent` is then 0.
    pub empty_denominator: bool,
}

pub fn hallucination_rate<'a, I>(verdicts: I) -> HallucinationRate
where
    I: IntoIterator<Item = &'a HallucinationVerdict>,
{
    let (passed, halluc) = verdicts.into_iter().fold((0usize, 0usize), |(p, h), v| {
        (p + usize::from(v.passed_gate), h + usize::from(v.is_hallucination))
    });
    HallucinationRate {
        percent: if passed == 0 {
            0.0
        } else {
            100.0 * halluc as f64 / passed as f64
        },
        passed_gate: passed,
        hallucinations: halluc,
        empty_denominator: passed == 0,
    }
}
