//! Hypothesis ensembling for LLM-based machine translation.
//!
//! Turns a set of sampled translations into one output by minimum Bayes
//! risk decoding, quality-estimation reranking, reference-oracle selection,
//! or LLM self-selection prompts. Also measures hypothesis diversity,
//! accounts token cost, and checks robustness to source perturbations.
//!
//! Module map:
//!
//! - [`data`]: records and JSONL corpus I/O
//! - [`metrics`]: chrF, sentence-BLEU, the [`metrics::Utility`] trait and the scorer client
//! - [`ensemble`]: utility matrices, MBR, ranking, oracle selection, diversity
//! - [`genkit`]: prompt templates, sampling, backends, cost ledger
//! - [`robustness`]: perturbations, hallucination detection, language identification
//! - [`cli`]: the batch pipeline behind the `mt-ensemble` binary

pub mod cli;
pub mod data;
pub mod ensemble;
pub mod genkit;
pub mod metrics;
pub mod robustness;
pub mod seed;
#[cfg(unix)]
pub mod stub;
pub mod wire;
