//! Source perturbations, hallucination-under-perturbation detection, and
//! wrong-target-language rates.

pub mod hallucination;
pub mod langid;
pub mod perturb;

pub use crate::seed::mix64;
pub use hallucination::{
    detect_hallucination, hallucination_rate, HallucinationRate, HallucinationVerdict, DEFAULT_CEILING,
    DEFAULT_GATE,
};
pub use langid::{wrong_language_rate, LangIdHandle, LanguageIdentifier, LANGID_PROTOCOL};
pub use perturb::{
    perturb, perturb_insert, perturb_misspell, perturb_titlecase, PerturbError, PerturbationKind,
    PerturbationRecord,
};
