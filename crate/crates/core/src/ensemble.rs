//! Selection kernels over a hypothesis set: MBR decoding, QE reranking,
//! reference-oracle selection, and the pairwise diversity statistic.
//!
//! All selectors break ties toward the lowest index, i.e. the earliest
//! generated hypothesis.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{EnsembleSelection, HypothesisSet, Method};
use crate::metrics::{MetricError, ScoreInput, ScoreRange, Utility};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("matrix row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("entry ({row}, {col}) = {value} is not finite")]
    NonFinite { row: usize, col: usize, value: f64 },
    #[error("utility `{name}` produced {value} at ({row}, {col}), outside [{min}, {max}]")]
    OutOfRange {
        name: String,
        row: usize,
        col: usize,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("matrix is {matrix}x{matrix} but the hypothesis set has {hyps} entries")]
    SizeMismatch { matrix: usize, hyps: usize },
    #[error("no scores to rank")]
    EmptyScores,
    #[error("score {index} = {value} is not finite")]
    NonFiniteScore { index: usize, value: f64 },
    #[error("oracle selection for `{0}` needs a reference")]
    MissingReference(String),
    #[error("ranking needs a reference-free scorer, but `{0}` needs a reference")]
    NeedsReferenceFree(String),
    #[error("diversity needs at least two hypotheses, got {0}")]
    TooFewHypotheses(usize),
    #[error("pseudo-reference count {m} must be in 1..={n}")]
    BadPseudoReferences { m: usize, n: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Pairwise utilities for one hypothesis set.
///
/// `entry(i, j) = u(candidate = hyp_i, pseudo-reference = hyp_j, source)`.
/// Rows are candidates and columns are pseudo-references; for asymmetric
/// utilities the orientation matters.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    segment_id: String,
    n: usize,
    entries: Vec<f64>,
    utility_name: String,
    utility_range: ScoreRange,
}

impl UtilityMatrix {
    /// Builds a matrix from rows, checking shape, finiteness and range.
    pub fn from_rows(
        segment_id: impl Into<String>,
        rows: Vec<Vec<f64>>,
        utility_name: impl Into<String>,
        utility_range: ScoreRange,
    ) -> Result<Self, EnsembleError> {
        let n = rows.len();
        if n == 0 {
            return Err(EnsembleError::EmptyMatrix);
        }
        let utility_name = utility_name.into();
        let mut entries = Vec::with_capacity(n * n);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != n {
                return Err(EnsembleError::NotSquare {
                    row,
                    len: r.len(),
                    n,
                });
            }
            for (col, value) in r.into_iter().enumerate() {
                if !value.is_finite() {
                    return Err(EnsembleError::NonFinite { row, col, value });
                }
                if !utility_range.contains(value) {
                    return Err(EnsembleError::OutOfRange {
                        name: utility_name.clone(),
                        row,
                        col,
                        value,
                        min: utility_range.min,
                        max: utility_range.max,
                    });
                }
                entries.push(value);
            }
        }
        Ok(UtilityMatrix {
            segment_id: segment_id.into(),
            n,
            entries,
            utility_name,
            utility_range,
        })
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn utility_name(&self) -> &str {
        &self.utility_name
    }

    pub fn utility_range(&self) -> ScoreRange {
        self.utility_range
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                t.entries[j * self.n + i] = self.get(i, j);
            }
        }
        t
    }

    /// Debug dump record: `{"segment_id":…,"entries":[[…]]}`.
    pub fn dump(&self) -> MatrixDump {
        MatrixDump {
            segment_id: self.segment_id.clone(),
            entries: self.rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDump {
    pub segment_id: String,
    pub entries: Vec<Vec<f64>>,
}

/// Scores every ordered pair of hypotheses with `utility`.
///
/// Identical hypothesis strings are scored once, so a set with `U` distinct
/// strings costs `U²` utility evaluations. Work is split into at most
/// `parallelism` concurrent batches.
pub fn compute_utility_matrix(
    source: &str,
    hyps: &HypothesisSet,
    utility: &dyn Utility,
    parallelism: usize,
) -> Result<UtilityMatrix, EnsembleError> {
    if hyps.is_empty() {
        return Err(EnsembleError::EmptyMatrix);
    }
    let mut distinct: Vec<&str> = Vec::new();
    let mut slot_of: HashMap<&str, usize> = HashMap::new();
    let slots: Vec<usize> = hyps
        .hypotheses
        .iter()
        .map(|h| {
            *slot_of.entry(h.text.as_str()).or_insert_with(|| {
                distinct.push(h.text.as_str());
                distinct.len() - 1
            })
        })
        .collect();

    let u = distinct.len();
    let inputs: Vec<ScoreInput<'_>> = (0..u * u)
        .map(|k| ScoreInput::new(source, distinct[k / u], Some(distinct[k % u])))
        .collect();
    let scores = score_parallel(utility, &inputs, parallelism)?;

    let rows = slots
        .iter()
        .map(|&si| slots.iter().map(|&sj| scores[si * u + sj]).collect())
        .collect();
    UtilityMatrix::from_rows(hyps.segment_id.clone(), rows, utility.name(), utility.range())
}

fn score_parallel(
    utility: &dyn Utility,
    inputs: &[ScoreInput<'_>],
    parallelism: usize,
) -> Result<Vec<f64>, EnsembleError> {
    let workers = parallelism.max(1).min(inputs.len().max(1));
    let scores = if workers == 1 {
        utility.score_batch(inputs)?
    } else {
        let chunk = inputs.len().div_ceil(workers);
        let parts: Vec<Result<Vec<f64>, MetricError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = inputs
                .chunks(chunk)
                .map(|part| scope.spawn(move || utility.score_batch(part)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scoring worker panicked"))
                .collect()
        });
        let mut scores = Vec::with_capacity(inputs.len());
        for part in parts {
            scores.extend(part?);
        }
        scores
    };
    if scores.len() != inputs.len() {
        return Err(MetricError::Misaligned {
            expected: inputs.len(),
            got: scores.len(),
        }
        .into());
    }
    Ok(scores)
}

/// Knobs for the Monte Carlo expected-utility estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MbrOptions {
    /// Drop the `j = i` term from each candidate's average.
    pub exclude_self: bool,
    /// Use only the first `m` hypotheses as pseudo-references (`None` = all).
    pub pseudo_references: Option<usize>,
}

/// Mean utility of each candidate against the pseudo-references.
pub fn expected_utilities(matrix: &UtilityMatrix, opts: MbrOptions) -> Result<Vec<f64>, EnsembleError> {
    let n = matrix.n();
    let m = opts.pseudo_references.unwrap_or(n);
    if m == 0 || m > n {
        return Err(EnsembleError::BadPseudoReferences { m, n });
    }
    Ok((0..n)
        .map(|i| {
            let row = &matrix.row(i)[..m];
            let (sum, count) = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| !(opts.exclude_self && j == i))
                .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
            if count == 0 {
                // lone pseudo-reference is the candidate itself
                row[i.min(m - 1)]
            } else {
                sum / count as f64
            }
        })
        .collect())
}

/// Index of the first maximum, or `None` for an empty slice.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

fn indexed(prefix: &str, values: &[f64]) -> IndexMap<String, f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| (format!("{prefix}[{i}]"), v))
        .collect()
}

fn check_size(n: usize, hyps: &HypothesisSet) -> Result<(), EnsembleError> {
    if n != hyps.len() {
        return Err(EnsembleError::SizeMismatch {
            matrix: n,
            hyps: hyps.len(),
        });
    }
    Ok(())
}

/// MBR decoding with the self term included and `M = N`.
pub fn mbr_select(matrix: &UtilityMatrix, hyps: &HypothesisSet) -> Result<EnsembleSelection, EnsembleError> {
    mbr_select_with(matrix, hyps, MbrOptions::default())
}

pub fn mbr_select_with(
    matrix: &UtilityMatrix,
    hyps: &HypothesisSet,
    opts: MbrOptions,
) -> Result<EnsembleSelection, EnsembleError> {
    check_size(matrix.n(), hyps)?;
    let eu = expected_utilities(matrix, opts)?;
    let best = argmax_first(&eu).expect("matrix is non-empty");
    Ok(EnsembleSelection {
        segment_id: hyps.segment_id.clone(),
        method: Method::Mbr,
        chosen_index: Some(best),
        chosen_text: hyps.hypotheses[best].text.clone(),
        score: Some(eu[best]),
        diagnostics: indexed("expected_utility", &eu),
    })
}

/// Reference-free quality scores for every hypothesis.
pub fn qe_scores(source: &str, hyps: &HypothesisSet, qe: &dyn Utility) -> Result<Vec<f64>, EnsembleError> {
    if qe.needs_reference() {
        return Err(EnsembleError::NeedsReferenceFree(qe.name().to_string()));
    }
    let inputs: Vec<ScoreInput<'_>> = hyps
        .hypotheses
        .iter()
        .map(|h| ScoreInput::new(source, &h.text, None))
        .collect();
    Ok(qe.score_batch(&inputs)?)
}

/// Picks the hypothesis with the highest QE score.
pub fn rank_select(qe_scores: &[f64], hyps: &HypothesisSet) -> Result<EnsembleSelection, EnsembleError> {
    if qe_scores.is_empty() {
        return Err(EnsembleError::EmptyScores);
    }
    check_size(qe_scores.len(), hyps)?;
    if let Some((index, &value)) = qe_scores.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(EnsembleError::NonFiniteScore { index, value });
    }
    let best = argmax_first(qe_scores).expect("non-empty");
    Ok(EnsembleSelection {
        segment_id: hyps.segment_id.clone(),
        method: Method::Rank,
        chosen_index: Some(best),
        chosen_text: hyps.hypotheses[best].text.clone(),
        score: Some(qe_scores[best]),
        diagnostics: indexed("qe", qe_scores),
    })
}

/// Picks the hypothesis closest to the true reference under `metric`.
pub fn oracle_select(
    hyps: &HypothesisSet,
    reference: Option<&str>,
    source: &str,
    metric: &dyn Utility,
) -> Result<EnsembleSelection, EnsembleError> {
    let reference = reference.ok_or_else(|| EnsembleError::MissingReference(hyps.segment_id.clone()))?;
    if hyps.is_empty() {
        return Err(EnsembleError::EmptyScores);
    }
    let inputs: Vec<ScoreInput<'_>> = hyps
        .hypotheses
        .iter()
        .map(|h| ScoreInput::new(source, &h.text, Some(reference)))
        .collect();
    let scores = metric.score_batch(&inputs)?;
    check_size(scores.len(), hyps)?;
    let best = argmax_first(&scores).expect("non-empty");
    Ok(EnsembleSelection {
        segment_id: hyps.segment_id.clone(),
        method: Method::Oracle,
        chosen_index: Some(best),
        chosen_text: hyps.hypotheses[best].text.clone(),
        score: Some(scores[best]),
        diagnostics: indexed("metric", &scores),
    })
}

/// Baseline selection of the first hypothesis (greedy output or a single sample).
pub fn first_select(hyps: &HypothesisSet, method: Method) -> Result<EnsembleSelection, EnsembleError> {
    let first = hyps.hypotheses.first().ok_or(EnsembleError::EmptyScores)?;
    Ok(EnsembleSelection {
        segment_id: hyps.segment_id.clone(),
        method,
        chosen_index: Some(0),
        chosen_text: first.text.clone(),
        score: None,
        diagnostics: IndexMap::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diversity {
    pub value: f64,
    /// Off-diagonal entries clamped into `[0, 1]`.
    pub clamped: usize,
}

/// One minus the mean utility over ordered pairs `i != j`.
///
/// Reuses an existing matrix, so it costs no scoring calls. Entries outside
/// `[0, 1]` are clamped and counted.
pub fn diversity(matrix: &UtilityMatrix) -> Result<Diversity, EnsembleError> {
    let n = matrix.n();
    if n < 2 {
        return Err(EnsembleError::TooFewHypotheses(n));
    }
    let mut sum = 0.0;
    let mut clamped = 0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let v = matrix.get(i, j);
            let c = v.clamp(0.0, 1.0);
            if c != v {
                clamped += 1;
            }
            sum += c;
        }
    }
    let value = 1.0 - sum / (n * (n - 1)) as f64;
    Ok(Diversity {
        value: value.clamp(0.0, 1.0),
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Hypothesis;
    use crate::metrics::Chrf;

    fn set(texts: &[&str]) -> HypothesisSet {
        HypothesisSet {
            segment_id: "s".into(),
            hypotheses: texts
                .iter()
                .map(|t| Hypothesis {
                    text: t.to_string(),
                    template_id: "hendy".into(),
                    temperature: 1.0,
                    top_p: 1.0,
                    prompt_tokens: 0,
                    completion_tokens: 0,
                })
                .collect(),
        }
    }

    fn unit(rows: Vec<Vec<f64>>) -> UtilityMatrix {
        UtilityMatrix::from_rows("s", rows, "test", ScoreRange::UNIT).unwrap()
    }

    #[test]
    fn singleton_chrf_matrix() {
        let m = compute_utility_matrix("src", &set(&["Hallo"]), &Chrf::default(), 1).unwrap();
        assert_eq!(m.rows(), vec![vec![1.0]]);
    }

    #[test]
    fn duplicate_hypotheses_give_identical_rows_and_columns() {
        let m = compute_utility_matrix("src", &set(&["ein Haus", "das Haus", "ein Haus"]), &Chrf::default(), 2).unwrap();
        assert_eq!(m.row(0), m.row(2));
        for i in 0..3 {
            assert_eq!(m.get(i, 0), m.get(i, 2));
        }
    }

    #[test]
    fn parallelism_does_not_change_entries() {
        let hyps = set(&["a b c", "a b d", "x y", "a c b", "b"]);
        let one = compute_utility_matrix("s", &hyps, &Chrf::default(), 1).unwrap();
        let many = compute_utility_matrix("s", &hyps, &Chrf::default(), 7).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn constant_matrix_ties_to_index_zero() {
        let m = unit(vec![vec![0.7; 5]; 5]);
        let sel = mbr_select(&m, &set(&["a", "b", "c", "d", "e"])).unwrap();
        assert_eq!(sel.chosen_index, Some(0));
        assert!((sel.score.unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn three_by_three_mbr() {
        let m = unit(vec![vec![1.0, 0.2, 0.4], vec![0.2, 1.0, 0.9], vec![0.4, 0.9, 1.0]]);
        let sel = mbr_select(&m, &set(&["a", "b", "c"])).unwrap();
        assert_eq!(sel.chosen_index, Some(2));
        assert_eq!(sel.chosen_text, "c");
        let eu: Vec<f64> = sel.diagnostics.values().copied().collect();
        let want = [1.6 / 3.0, 2.1 / 3.0, 2.3 / 3.0];
        for (g, w) in eu.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn self_term_exclusion_and_subset() {
        let m = unit(vec![vec![1.0, 0.2, 0.4], vec![0.2, 1.0, 0.9], vec![0.4, 0.9, 1.0]]);
        let eu = expected_utilities(&m, MbrOptions { exclude_self: true, pseudo_references: None }).unwrap();
        assert_eq!(eu, vec![0.30000000000000004, 0.55, 0.65]);
        let eu = expected_utilities(&m, MbrOptions { exclude_self: false, pseudo_references: Some(1) }).unwrap();
        assert_eq!(eu, vec![1.0, 0.2, 0.4]);
        assert!(expected_utilities(&m, MbrOptions { exclude_self: false, pseudo_references: Some(4) }).is_err());
    }

    #[test]
    fn size_mismatch_rejected() {
        let m = unit(vec![vec![1.0]]);
        assert!(matches!(mbr_select(&m, &set(&["a", "b"])), Err(EnsembleError::SizeMismatch { .. })));
    }

    #[test]
    fn matrix_validation() {
        assert!(matches!(
            UtilityMatrix::from_rows("s", vec![vec![1.0, 0.0]], "u", ScoreRange::UNIT),
            Err(EnsembleError::NotSquare { .. })
        ));
        assert!(matches!(
            UtilityMatrix::from_rows("s", vec![vec![f64::NAN]], "u", ScoreRange::UNIT),
            Err(EnsembleError::NonFinite { .. })
        ));
        assert!(matches!(
            UtilityMatrix::from_rows("s", vec![vec![1.5]], "u", ScoreRange::UNIT),
            Err(EnsembleError::OutOfRange { .. })
        ));
    }

    #[test]
    fn rank_examples() {
        let hyps = set(&["a", "b", "c"]);
        assert_eq!(rank_select(&[0.2, 0.9, 0.5], &hyps).unwrap().chosen_index, Some(1));
        assert_eq!(rank_select(&[0.4, 0.4], &set(&["a", "b"])).unwrap().chosen_index, Some(0));
        assert!(matches!(rank_select(&[], &hyps), Err(EnsembleError::EmptyScores)));
        assert!(matches!(rank_select(&[0.1, f64::NAN, 0.2], &hyps), Err(EnsembleError::NonFiniteScore { index: 1, .. })));
    }

    #[test]
    fn rank_requires_reference_free_scorer() {
        let err = qe_scores("s", &set(&["a"]), &Chrf::default()).unwrap_err();
        assert!(matches!(err, EnsembleError::NeedsReferenceFree(_)));
    }

    #[test]
    fn oracle_prefers_reference() {
        let hyps = set(&["Das Haus ist rot.", "Ein Haus, rot.", "Das Haus ist rot!"]);
        let sel = oracle_select(&hyps, Some("Das Haus ist rot!"), "The house is red.", &Chrf::default()).unwrap();
        assert_eq!(sel.chosen_index, Some(2));
        assert_eq!(sel.score, Some(1.0));
        assert!(matches!(
            oracle_select(&hyps, None, "x", &Chrf::default()),
            Err(EnsembleError::MissingReference(_))
        ));
        let single = oracle_select(&set(&["zzz"]), Some("abc"), "x", &Chrf::default()).unwrap();
        assert_eq!(single.chosen_index, Some(0));
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity(&unit(vec![vec![1.0; 3]; 3])).unwrap().value, 0.0);
        assert_eq!(diversity(&unit(vec![vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap().value, 1.0);
        let m = unit(vec![vec![1.0, 0.2, 0.4], vec![0.2, 1.0, 0.9], vec![0.4, 0.9, 1.0]]);
        assert_eq!(diversity(&m).unwrap().value, 0.5);
        assert!(matches!(diversity(&unit(vec![vec![1.0]])), Err(EnsembleError::TooFewHypotheses(1))));
    }

    #[test]
    fn diversity_clamps_out_of_unit_entries() {
        let m = UtilityMatrix::from_rows("s", vec![vec![1.0, 1.2], vec![-0.4, 1.0]], "comet", ScoreRange::UNBOUNDED).unwrap();
        let d = diversity(&m).unwrap();
        assert_eq!(d.clamped, 2);
        assert_eq!(d.value, 0.5);
    }

    #[test]
    fn argmax_first_ties() {
        assert_eq!(argmax_first(&[]), None);
        assert_eq!(argmax_first(&[1.0, 3.0, 3.0]), Some(1));
    }
}
