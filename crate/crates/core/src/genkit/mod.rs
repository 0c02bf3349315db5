//! Hypothesis generation against a completion backend.

pub mod backend;
pub mod cost;
pub mod prompts;
mod sampling;
mod select;

pub use backend::{
    BackendError, CompletionBackend, CompletionChoice, CompletionRequest, CompletionResponse,
    EchoBackend, FixedBackend, HttpBackend, NoisyCopyBackend,
};
pub use cost::{relative_cost, CostError, CostLedger, CostRecord};
pub use prompts::{
    build_choosebest_prompt, build_generatebest_prompt, build_translation_prompt, language_name,
    parse_choosebest_answer, PromptError, Shot, TemplateId,
};
pub use sampling::{clean_completion, sample_hypotheses, GenError, SamplingConfig, SamplingMode};
pub use select::{choose_best, generate_best};
