use thiserror::Error;

use super::{bleu, chrf};
use crate::wire::WireError;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("utility `{0}` needs a reference but none was supplied")]
    MissingReference(String),
    #[error("scorer returned a non-finite score for request {id}")]
    NonFinite { id: u64 },
    #[error("utility `{name}` returned {score}, outside its declared range [{min}, {max}]")]
    OutOfRange {
        name: String,
        score: f64,
        min: f64,
        max: f64,
    },
    #[error("scorer returned {got} scores for {expected} inputs")]
    Misaligned { expected: usize, got: usize },
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Closed interval of attainable scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRange {
    pub min: f64,
    pub max: f64,
}

impl ScoreRange {
    pub const UNIT: ScoreRange = ScoreRange { min: 0.0, max: 1.0 };
    pub const PERCENT: ScoreRange = ScoreRange { min: 0.0, max: 100.0 };
    pub const UNBOUNDED: ScoreRange = ScoreRange {
        min: f64::NEG_INFINITY,
        max: f64::INFINITY,
    };

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn within_unit(&self) -> bool {
        self.min >= 0.0 && self.max <= 1.0
    }
}

/// One `(source, candidate, reference)` triple to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScoreInput<'a> {
    pub src: &'a str,
    pub mt: &'a str,
    pub reference: Option<&'a str>,
}

impl<'a> ScoreInput<'a> {
    pub fn new(src: &'a str, mt: &'a str, reference: Option<&'a str>) -> Self {
        ScoreInput { src, mt, reference }
    }
}

/// A utility function `u(candidate, reference | source)`.
///
/// Implementations must be deterministic: the same triple always yields the
/// same score.
pub trait Utility: Send + Sync {
    fn name(&self) -> &str;
    fn needs_reference(&self) -> bool;
    fn needs_source(&self) -> bool;
    fn range(&self) -> ScoreRange;

    /// Scores `inputs`, returning one value per input in the same order.
    fn score_batch(&self, inputs: &[ScoreInput<'_>]) -> Result<Vec<f64>, MetricError>;

    fn score(&self, input: ScoreInput<'_>) -> Result<f64, MetricError> {
        let mut out = self.score_batch(&[input])?;
        out.pop().ok_or(MetricError::Misaligned { expected: 1, got: 0 })
    }
}

fn require_reference<'a>(name: &str, input: &ScoreInput<'a>) -> Result<&'a str, MetricError> {
    input
        .reference
        .ok_or_else(|| MetricError::MissingReference(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chrf {
    pub max_order: usize,
    pub beta: f64,
}

impl Default for Chrf {
    fn default() -> Self {
        Chrf {
            max_order: chrf::DEFAULT_MAX_ORDER,
            beta: chrf::DEFAULT_BETA,
        }
    }
}

impl Utility for Chrf {
    fn name(&self) -> &str {
        "chrf"
    }
    fn needs_reference(&self) -> bool {
        true
    }
    fn needs_source(&self) -> bool {
        false
    }
    fn range(&self) -> ScoreRange {
        ScoreRange::UNIT
    }

    fn score_batch(&self, inputs: &[ScoreInput<'_>]) -> Result<Vec<f64>, MetricError> {
        inputs
            .iter()
            .map(|i| {
                let r = require_reference(self.name(), i)?;
                Ok(chrf::chrf_with(i.mt, r, self.max_order, self.beta))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceBleu {
    pub max_order: usize,
}

impl Default for SentenceBleu {
    fn default() -> Self {
        SentenceBleu {
            max_order: bleu::DEFAULT_MAX_ORDER,
        }
    }
}

impl Utility for SentenceBleu {
    fn name(&self) -> &str {
        "bleu"
    }
    fn needs_reference(&self) -> bool {
        true
    }
    fn needs_source(&self) -> bool {
        false
    }
    fn range(&self) -> ScoreRange {
        ScoreRange::PERCENT
    }

    fn score_batch(&self, inputs: &[ScoreInput<'_>]) -> Result<Vec<f64>, MetricError> {
        inputs
            .iter()
            .map(|i| {
                let r = require_reference(self.name(), i)?;
                Ok(bleu::sentence_bleu_with(i.mt, r, self.max_order))
            })
            .collect()
    }
}
