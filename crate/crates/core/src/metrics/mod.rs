//! Lexical metrics, the utility abstraction, and the scorer wire client.

pub mod bleu;
pub mod chrf;
pub mod scorer;
mod utility;

pub use bleu::{sentence_bleu, sentence_bleu_with};
pub use chrf::{chrf, chrf_with};
pub use scorer::{scorer_connect, ScoreRequest, ScoreResponse, ScorerHandle, SCORER_PROTOCOL};
pub use utility::{Chrf, MetricError, ScoreInput, ScoreRange, SentenceBleu, Utility};
