use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{BackendError, CompletionBackend, CompletionRequest};
use super::cost::{CostLedger, CostRecord};
use super::prompts::PromptError;
use crate::data::{Hypothesis, HypothesisSet};

pub const DEFAULT_MAX_TOKENS: u32 = 256;

#[derive(Debug, Error)]
pub enum GenError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("backend returned {got} of {requested} requested completions")]
    ShortBatch {
        requested: u32,
        got: usize,
        partial: HypothesisSet,
    },
    #[error("invalid sampling config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Greedy,
    Unbiased,
    Biased,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub mode: SamplingMode,
    pub temperature: f64,
    pub top_p: f64,
    pub n: u32,
    pub max_tokens: u32,
}

impl SamplingConfig {
    /// Single deterministic output at temperature 0.
    pub fn greedy() -> Self {
        SamplingConfig {
            mode: SamplingMode::Greedy,
            temperature: 0.0,
            top_p: 1.0,
            n: 1,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Greedy stand-in at temperature 0.1 for backends that reject 0.
    pub fn greedy_proxy() -> Self {
        SamplingConfig {
            temperature: 0.1,
            ..Self::greedy()
        }
    }

    /// Ancestral sampling at temperature 1 without truncation.
    pub fn unbiased(n: u32) -> Self {
        SamplingConfig {
            mode: SamplingMode::Unbiased,
            temperature: 1.0,
            top_p: 1.0,
            n,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Temperature 0.8 with nucleus 0.95.
    pub fn biased(n: u32) -> Self {
        SamplingConfig {
            mode: SamplingMode::Biased,
            temperature: 0.8,
            top_p: 0.95,
            n,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn custom(temperature: f64, top_p: f64, n: u32) -> Self {
        SamplingConfig {
            mode: SamplingMode::Custom,
            temperature,
            top_p,
            n,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::Config(msg));
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!("temperature {} must be >= 0", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p {} must be in (0, 1]", self.top_p));
        }
        if self.n == 0 || self.max_tokens == 0 {
            return bad("n and max_tokens must be >= 1".into());
        }
        match self.mode {
            SamplingMode::Greedy if self.temperature > 0.1 || self.n != 1 => {
                bad("greedy mode needs temperature <= 0.1 and n = 1".into())
            }
            SamplingMode::Unbiased if self.temperature != 1.0 || self.top_p != 1.0 => {
                bad("unbiased mode needs temperature = 1 and top_p = 1".into())
            }
            SamplingMode::Biased if self.temperature != 0.8 || self.top_p != 0.95 => {
                bad("biased mode needs temperature = 0.8 and top_p = 0.95".into())
            }
            _ => Ok(()),
        }
    }
}

/// First non-empty line of a completion, trimmed.
pub fn clean_completion(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
        .to_string()
}

/// Draws `cfg.n` completions for `prompt` in a single backend request.
///
/// The prompt is billed once for the whole batch: the ledger gets one
/// record with the backend's prompt token count and the summed completion
/// tokens.
pub fn sample_hypotheses(
    backend: &dyn CompletionBackend,
    segment_id: &str,
    template_id: &str,
    prompt: &str,
    cfg: &SamplingConfig,
    ledger: &CostLedger,
    purpose: &str,
) -> Result<HypothesisSet, GenError> {
    cfg.validate()?;
    let req = CompletionRequest {
        prompt: prompt.to_string(),
        n: cfg.n,
        temperature: cfg.temperature,
        top_p: cfg.top_p,
        max_tokens: cfg.max_tokens,
        stop: Vec::new(),
    };
    let resp = backend.complete(&req)?;

    let hypotheses: Vec<Hypothesis> = resp
        .choices
        .iter()
        .take(cfg.n as usize)
        .map(|c| Hypothesis {
            text: clean_completion(&c.text),
            template_id: template_id.to_string(),
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            prompt_tokens: resp.prompt_tokens,
            completion_tokens: c.completion_tokens,
        })
        .collect();
    ledger.append(CostRecord {
        segment_id: segment_id.to_string(),
        purpose: purpose.to_string(),
        prompt_tokens: resp.prompt_tokens,
        completion_tokens: hypotheses.iter().map(|h| h.completion_tokens).sum(),
    });

    let set = HypothesisSet {
        segment_id: segment_id.to_string(),
        hypotheses,
    };
    if set.len() < cfg.n as usize {
        return Err(GenError::ShortBatch {
            requested: cfg.n,
            got: set.len(),
            partial: set,
        });
    }
    Ok(set)
}
