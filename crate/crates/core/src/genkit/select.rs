//! LLM self-selection: ChooseBest and GenerateBest.

use indexmap::IndexMap;

use super::backend::CompletionBackend;
use super::cost::CostLedger;
use super::prompts::{build_choosebest_prompt, build_generatebest_prompt, language_name, parse_choosebest_answer};
use super::sampling::{sample_hypotheses, GenError, SamplingConfig};
use crate::data::{EnsembleSelection, HypothesisSet, Method, SourceSegment};

fn names(seg: &SourceSegment) -> (&str, &str) {
    (
        language_name(&seg.src_lang).unwrap_or(&seg.src_lang),
        language_name(&seg.tgt_lang).unwrap_or(&seg.tgt_lang),
    )
}

/// Asks the model to pick one hypothesis as a multiple-choice answer.
pub fn choose_best(
    backend: &dyn CompletionBackend,
    seg: &SourceSegment,
    hyps: &HypothesisSet,
    cfg: &SamplingConfig,
    ledger: &CostLedger,
) -> Result<EnsembleSelection, GenError> {
    let (src_lang, tgt_lang) = names(seg);
    let prompt = build_choosebest_prompt(src_lang, tgt_lang, &seg.text, &hyps.texts())?;
    let cfg = SamplingConfig { n: 1, ..*cfg };
    let reply = sample_hypotheses(backend, &seg.id, "choose_best", &prompt, &cfg, ledger, "choose_best")?;
    let index = parse_choosebest_answer(&reply.hypotheses[0].text, hyps.len())?;
    Ok(EnsembleSelection {
        segment_id: hyps.segment_id.clone(),
        method: Method::ChooseBest,
        chosen_index: Some(index),
        chosen_text: hyps.hypotheses[index].text.clone(),
        score: None,
        diagnostics: IndexMap::new(),
    })
}

/// Asks the model to write a final translation given all hypotheses.
///
/// The output may be new text, so no index is recorded.
pub fn generate_best(
    backend: &dyn CompletionBackend,
    seg: &SourceSegment,
    hyps: &HypothesisSet,
    cfg: &SamplingConfig,
    ledger: &CostLedger,
) -> Result<EnsembleSelection, GenError> {
    let (src_lang, tgt_lang) = names(seg);
    let prompt = build_generatebest_prompt(src_lang, tgt_lang, &seg.text, &hyps.texts())?;
    let cfg = SamplingConfig { n: 1, ..*cfg };
    let reply = sample_hypotheses(backend, &seg.id, "generate_best", &prompt, &cfg, ledger, "generate_best")?;
    Ok(EnsembleSelection {
        segment_id: hyps.segment_id.clone(),
        method: Method::GenerateBest,
        chosen_index: None,
        chosen_text: reply.hypotheses[0].text.clone(),
        score: None,
        diagnostics: IndexMap::new(),
    })
}
