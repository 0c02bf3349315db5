//! Subcommand bodies. Each reads its inputs, runs a bounded parallel map
//! over segments, and writes every output atomically.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, Stamp, Stamped};
use super::services::Services;
use crate::data::{
    load_hypothesis_sets, load_records, load_segments, load_selections, write_atomic, write_jsonl,
    EnsembleSelection, Hypothesis, HypothesisSet, Method, SourceSegment,
};
use crate::ensemble::{
    compute_utility_matrix, diversity, first_select, mbr_select_with, oracle_select, qe_scores, rank_select,
    MbrOptions, UtilityMatrix,
};
use crate::genkit::{
    build_translation_prompt, choose_best, generate_best, language_name, relative_cost, sample_hypotheses,
    CompletionBackend, CompletionRequest, CostLedger, CostRecord, GenError, SamplingConfig, Shot, TemplateId,
};
use crate::metrics::{sentence_bleu, ScoreInput, Utility};
use crate::robustness::{detect_hallucination, hallucination_rate, perturb, PerturbationKind, PerturbationRecord};
use crate::seed;

/// `out.jsonl` → `out.<tag>.jsonl`.
pub fn sidecar(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{tag}.jsonl"))
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism).build()?)
}

/// Ordered parallel map that fails on the first error in input order.
fn par_map<T, U, F>(cfg: &RunConfig, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    pool(cfg)?.install(|| items.par_iter().map(&f).collect())
}

fn write_stamped<T: Serialize>(path: &Path, records: &[T], stamp: &Stamp) -> Result<()> {
    write_jsonl(path, records.iter().map(|record| Stamped { record, stamp }))
        .with_context(|| format!("writing {}", path.display()))
}

fn write_ledger(path: &Path, ledger: &CostLedger, stamp: &Stamp) -> Result<()> {
    write_stamped(path, &ledger.records(), stamp)
}

/// Writes a CSV with `config_hash` and `seed` appended to every row.
fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>], stamp: &Stamp) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let seed = stamp.seed.to_string();
    w.write_record(header.iter().copied().chain(["config_hash", "seed"]))?;
    for row in rows {
        w.write_record(row.iter().map(String::as_str).chain([stamp.config_hash.as_str(), seed.as_str()]))?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv buffer: {e}"))?;
    write_atomic(path, |out| out.write_all(&bytes).map_err(serde_json::Error::io))
        .with_context(|| format!("writing {}", path.display()))
}

fn segment_index(segments: &[SourceSegment]) -> HashMap<&str, &SourceSegment> {
    segments.iter().map(|s| (s.id.as_str(), s)).collect()
}

fn lookup<'a>(index: &HashMap<&str, &'a SourceSegment>, id: &str) -> Result<&'a SourceSegment> {
    index
        .get(id)
        .copied()
        .ok_or_else(|| anyhow!("segment `{id}` is missing from the sources"))
}

fn load_shots(cfg: &RunConfig) -> Result<Vec<Shot>> {
    match &cfg.shots {
        Some(p) => Ok(load_records(p)?),
        None => Ok(Vec::new()),
    }
}

fn lang_names(seg: &SourceSegment) -> (&str, &str) {
    (
        language_name(&seg.src_lang).unwrap_or(&seg.src_lang),
        language_name(&seg.tgt_lang).unwrap_or(&seg.tgt_lang),
    )
}

/// Strips a leading list marker such as `1.`, `2)` or `-`.
fn strip_enumeration(line: &str) -> &str {
    let t = line.trim();
    let digits = t.len() - t.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    let rest = &t[digits..];
    if digits > 0 {
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim_start();
        }
    }
    t.strip_prefix("- ").unwrap_or(t)
}

/// One request asking for `n` translations at once; the reply is split into lines.
fn sample_multi_n(
    backend: &dyn CompletionBackend,
    seg: &SourceSegment,
    prompt: &str,
    cfg: &SamplingConfig,
    ledger: &CostLedger,
) -> Result<HypothesisSet, GenError> {
    cfg.validate()?;
    let resp = backend.complete(&CompletionRequest {
        prompt: prompt.to_string(),
        n: 1,
        temperature: cfg.temperature,
        top_p: cfg.top_p,
        max_tokens: cfg.max_tokens.saturating_mul(cfg.n),
        stop: Vec::new(),
    })?;
    let choice = resp.choices.first();
    let completion_tokens = choice.map_or(0, |c| c.completion_tokens);
    ledger.append(CostRecord {
        segment_id: seg.id.clone(),
        purpose: "generate".into(),
        prompt_tokens: resp.prompt_tokens,
        completion_tokens,
    });
    let lines: Vec<&str> = choice
        .map(|c| c.text.lines().map(strip_enumeration).filter(|l| !l.is_empty()).collect())
        .unwrap_or_default();
    let set = HypothesisSet {
        segment_id: seg.id.clone(),
        hypotheses: lines
            .iter()
            .take(cfg.n as usize)
            .enumerate()
            .map(|(i, l)| Hypothesis {
                text: l.to_string(),
                template_id: TemplateId::MultiN.to_string(),
                temperature: cfg.temperature,
                top_p: cfg.top_p,
                prompt_tokens: resp.prompt_tokens,
                // the whole reply is billed on the first hypothesis
                completion_tokens: if i == 0 { completion_tokens } else { 0 },
            })
            .collect(),
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

/// Samples hypotheses for one segment with every configured template.
fn generate_segment(
    backend: &dyn CompletionBackend,
    seg: &SourceSegment,
    templates: &[TemplateId],
    shots: &[Shot],
    sampling: &SamplingConfig,
    ledger: &CostLedger,
) -> Result<HypothesisSet> {
    let (src_lang, tgt_lang) = lang_names(seg);
    let mut set = HypothesisSet {
        segment_id: seg.id.clone(),
        hypotheses: Vec::new(),
    };
    for &template in templates {
        let part = if template == TemplateId::MultiN {
            let prompt = build_translation_prompt(template, src_lang, tgt_lang, &seg.text, Some(sampling.n as usize), &[])?;
            sample_multi_n(backend, seg, &prompt, sampling, ledger)?
        } else {
            let prompt = build_translation_prompt(template, src_lang, tgt_lang, &seg.text, None, shots)?;
            sample_hypotheses(backend, &seg.id, template.as_str(), &prompt, sampling, ledger, "generate")?
        };
        set.extend(part);
    }
    Ok(set)
}

/// Samples hypotheses for every source segment.
///
/// Writes the hypothesis sets to `out` and the token ledger next to it.
pub fn cmd_generate(cfg: &RunConfig, svc: &Services, sources: &Path, out: &Path) -> Result<()> {
    let segments = load_segments(sources)?;
    let backend = svc.backend()?;
    let sampling = cfg.sampling_config()?;
    let shots = load_shots(cfg)?;
    let results = par_map(cfg, &segments, |seg| {
        let ledger = CostLedger::new();
        let set = generate_segment(backend, seg, &cfg.templates, &shots, &sampling, &ledger)
            .with_context(|| format!("segment `{}`", seg.id))?;
        Ok((set, ledger))
    })?;
    let ledger = CostLedger::new();
    let sets: Vec<HypothesisSet> = results
        .into_iter()
        .map(|(set, l)| {
            ledger.merge(&l);
            set
        })
        .collect();
    let stamp = cfg.stamp();
    write_stamped(out, &sets, &stamp)?;
    write_ledger(&sidecar(out, "ledger"), &ledger, &stamp)
}

fn mbr_options(cfg: &RunConfig) -> MbrOptions {
    MbrOptions {
        exclude_self: cfg.mbr_exclude_self,
        pseudo_references: cfg.pseudo_references,
    }
}

/// MBR selection with diversity read off the same matrix.
pub fn mbr_with_diversity(
    matrix: &UtilityMatrix,
    hyps: &HypothesisSet,
    opts: MbrOptions,
) -> Result<EnsembleSelection> {
    let mut sel = mbr_select_with(matrix, hyps, opts)?;
    if matrix.n() >= 2 {
        let d = diversity(matrix)?;
        sel.diagnostics.insert("diversity".into(), d.value);
        sel.diagnostics.insert("diversity_clamped".into(), d.clamped as f64);
    }
    Ok(sel)
}

struct SegmentOutcome {
    selection: EnsembleSelection,
    matrix: Option<UtilityMatrix>,
    ledger: CostLedger,
}

fn ensemble_segment(
    cfg: &RunConfig,
    svc: &Services,
    method: Method,
    seg: &SourceSegment,
    hyps: &HypothesisSet,
) -> Result<SegmentOutcome> {
    let ledger = CostLedger::new();
    let mut matrix = None;
    let selection = match method {
        Method::Mbr => {
            let m = compute_utility_matrix(&seg.text, hyps, svc.utility()?, 1)?;
            let sel = mbr_with_diversity(&m, hyps, mbr_options(cfg))?;
            matrix = Some(m);
            sel
        }
        Method::Rank => rank_select(&qe_scores(&seg.text, hyps, svc.qe()?)?, hyps)?,
        Method::Oracle => oracle_select(hyps, seg.reference.as_deref(), &seg.text, svc.metric()?)?,
        Method::ChooseBest | Method::GenerateBest => {
            let sampling = SamplingConfig {
                max_tokens: cfg.sampling.max_tokens,
                ..SamplingConfig::greedy()
            };
            if method == Method::ChooseBest {
                choose_best(svc.backend()?, seg, hyps, &sampling, &ledger)?
            } else {
                generate_best(svc.backend()?, seg, hyps, &sampling, &ledger)?
            }
        }
        Method::Greedy | Method::Sample => first_select(hyps, method)?,
    };
    Ok(SegmentOutcome {
        selection,
        matrix,
        ledger,
    })
}

/// Selects one output per hypothesis set with `method`.
///
/// With `matrices`, MBR utility matrices are also written there. LLM
/// selection methods write their token ledger next to `out`.
pub fn cmd_ensemble(
    cfg: &RunConfig,
    svc: &Services,
    method: Method,
    hyps_path: &Path,
    sources: &Path,
    out: &Path,
    matrices: Option<&Path>,
) -> Result<()> {
    let sets = load_hypothesis_sets(hyps_path)?;
    let segments = load_segments(sources)?;
    let index = segment_index(&segments);
    let outcomes = par_map(cfg, &sets, |hyps| {
        let seg = lookup(&index, &hyps.segment_id)?;
        ensemble_segment(cfg, svc, method, seg, hyps).with_context(|| format!("segment `{}`", hyps.segment_id))
    })?;

    let stamp = cfg.stamp();
    let selections: Vec<&EnsembleSelection> = outcomes.iter().map(|o| &o.selection).collect();
    write_stamped(out, &selections, &stamp)?;
    if let Some(path) = matrices {
        let dumps: Vec<_> = outcomes.iter().filter_map(|o| o.matrix.as_ref().map(UtilityMatrix::dump)).collect();
        write_stamped(path, &dumps, &stamp)?;
    }
    if matches!(method, Method::ChooseBest | Method::GenerateBest) {
        let ledger = CostLedger::new();
        for o in &outcomes {
            ledger.merge(&o.ledger);
        }
        write_ledger(&sidecar(out, "ledger"), &ledger, &stamp)?;
    }
    Ok(())
}

/// Per-segment diversity under the configured utility, as CSV.
pub fn cmd_diversity(cfg: &RunConfig, svc: &Services, hyps_path: &Path, sources: Option<&Path>, out: &Path) -> Result<()> {
    let sets = load_hypothesis_sets(hyps_path)?;
    let segments = match sources {
        Some(p) => load_segments(p)?,
        None => Vec::new(),
    };
    let index = segment_index(&segments);
    let utility = svc.utility()?;
    let rows = par_map(cfg, &sets, |hyps| {
        let src = match sources {
            Some(_) => lookup(&index, &hyps.segment_id)?.text.as_str(),
            None => "",
        };
        let m = compute_utility_matrix(src, hyps, utility, 1)?;
        let d = diversity(&m).with_context(|| format!("segment `{}`", hyps.segment_id))?;
        Ok(vec![
            hyps.segment_id.clone(),
            hyps.len().to_string(),
            d.value.to_string(),
            d.clamped.to_string(),
        ])
    })?;
    write_csv(out, &["segment_id", "n", "diversity", "clamped"], &rows, &cfg.stamp())
}

/// Perturbs every source sentence.
///
/// Each segment uses the seed `derive(run seed, segment id)`. Writes the
/// perturbed segments to `out` and the perturbation records next to it.
pub fn cmd_perturb(
    cfg: &RunConfig,
    kind: PerturbationKind,
    sources: &Path,
    tokens: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let segments = load_segments(sources)?;
    let tokens: Vec<String> = match tokens {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect(),
        None if kind == PerturbationKind::Insert => bail!("insert perturbation needs --tokens"),
        None => Vec::new(),
    };
    let mut perturbed = Vec::with_capacity(segments.len());
    let mut records = Vec::with_capacity(segments.len());
    for seg in &segments {
        let s = seed::derive(cfg.seed, &seg.id);
        let text = perturb(kind, &seg.text, s, &tokens).with_context(|| format!("segment `{}`", seg.id))?;
        records.push(PerturbationRecord {
            segment_id: seg.id.clone(),
            kind,
            original: seg.text.clone(),
            perturbed: text.clone(),
            seed: s,
        });
        perturbed.push(SourceSegment { text, ..seg.clone() });
    }
    let stamp = cfg.stamp();
    write_stamped(out, &perturbed, &stamp)?;
    write_stamped(&sidecar(out, "records"), &records, &stamp)
}

fn quality(utility: &dyn Utility, seg: &SourceSegment, text: &str) -> Result<f64> {
    let reference = seg
        .reference
        .as_deref()
        .ok_or_else(|| anyhow!("segment `{}` has no reference", seg.id))?;
    Ok(utility.score(ScoreInput::new(&seg.text, text, Some(reference)))?)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// One sweep point: `(diversity, quality_mbr, quality_rank)` per segment.
fn sweep_segment(
    svc: &Services,
    cfg: &RunConfig,
    seg: &SourceSegment,
    shots: &[Shot],
    sampling: &SamplingConfig,
) -> Result<(Option<f64>, f64, Option<f64>)> {
    let ledger = CostLedger::new();
    let hyps = generate_segment(svc.backend()?, seg, &cfg.templates, shots, sampling, &ledger)?;
    let utility = svc.utility()?;
    let m = compute_utility_matrix(&seg.text, &hyps, utility, 1)?;
    let div = if m.n() >= 2 { Some(diversity(&m)?.value) } else { None };
    let mbr = mbr_select_with(&m, &hyps, mbr_options(cfg))?;
    let q_mbr = quality(utility, seg, &mbr.chosen_text)?;
    let q_rank = match &svc.qe {
        Some(qe) => {
            let r = rank_select(&qe_scores(&seg.text, &hyps, qe.as_ref())?, &hyps)?;
            Some(quality(utility, seg, &r.chosen_text)?)
        }
        None => None,
    };
    Ok((div, q_mbr, q_rank))
}

/// Temperature sweep: mean diversity and selection quality per temperature.
///
/// Quality is the configured utility of the selected hypothesis against the
/// reference. `quality_rank` is left empty when no QE scorer is bound.
pub fn cmd_sweep_temperature(cfg: &RunConfig, svc: &Services, sources: &Path, temps: &[f64], out: &Path) -> Result<()> {
    if temps.is_empty() {
        bail!("no temperatures given");
    }
    let segments = load_segments(sources)?;
    let shots = load_shots(cfg)?;
    let base = cfg.sampling_config()?;
    let mut rows = Vec::with_capacity(temps.len());
    for &t in temps {
        let sampling = SamplingConfig::custom(t, base.top_p, base.n);
        let sampling = SamplingConfig {
            max_tokens: base.max_tokens,
            ..sampling
        };
        let points = par_map(cfg, &segments, |seg| {
            sweep_segment(svc, cfg, seg, &shots, &sampling).with_context(|| format!("segment `{}` at t={t}", seg.id))
        })?;
        let divs: Vec<f64> = points.iter().filter_map(|p| p.0).collect();
        let mbr: Vec<f64> = points.iter().map(|p| p.1).collect();
        let rank: Vec<f64> = points.iter().filter_map(|p| p.2).collect();
        rows.push(vec![
            t.to_string(),
            if divs.is_empty() { String::new() } else { mean(&divs).to_string() },
            mean(&mbr).to_string(),
            if svc.qe.is_some() { mean(&rank).to_string() } else { String::new() },
        ]);
    }
    write_csv(out, &["temperature", "diversity", "quality_mbr", "quality_rank"], &rows, &cfg.stamp())
}

/// Selections grouped by method in canonical method order.
fn by_method(selections: Vec<EnsembleSelection>) -> BTreeMap<usize, (Method, Vec<EnsembleSelection>)> {
    let mut groups: BTreeMap<usize, (Method, Vec<EnsembleSelection>)> = BTreeMap::new();
    for s in selections {
        let key = Method::ALL.iter().position(|m| *m == s.method).expect("known method");
        groups.entry(key).or_insert_with(|| (s.method, Vec::new())).1.push(s);
    }
    groups
}

fn unique_ids<'a>(method: Method, sels: &'a [EnsembleSelection], file: &str) -> Result<HashMap<&'a str, &'a EnsembleSelection>> {
    let mut out = HashMap::new();
    for s in sels {
        if out.insert(s.segment_id.as_str(), s).is_some() {
            bail!("{file} selections repeat segment `{}` for method {method}", s.segment_id);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodVerdict {
    pub method: Method,
    #[serde(flatten)]
    pub verdict: crate::robustness::HallucinationVerdict,
}

/// Hallucination rates per method.
///
/// For every segment the unperturbed and perturbed selections are scored
/// with sentence-BLEU against the reference and classified with the gate
/// and ceiling thresholds. With `joint_gate`, a segment is gated in only when
/// every method's unperturbed output passes the gate.
pub fn cmd_hallucination_report(cfg: &RunConfig, base: &Path, perturbed: &Path, refs: &Path, out: &Path) -> Result<()> {
    let base = by_method(load_selections(base)?);
    let mut pert = by_method(load_selections(perturbed)?);
    let segments = load_segments(refs)?;
    let index = segment_index(&segments);

    let mut per_method: Vec<(Method, Vec<MethodVerdict>)> = Vec::new();
    for (key, (method, sels)) in &base {
        let (_, psels) = pert
            .remove(key)
            .ok_or_else(|| anyhow!("perturbed selections have no rows for method {method}"))?;
        let b = unique_ids(*method, sels, "base")?;
        let p = unique_ids(*method, &psels, "perturbed")?;
        let bk: HashSet<&str> = b.keys().copied().collect();
        let pk: HashSet<&str> = p.keys().copied().collect();
        if bk != pk {
            let mut diff: Vec<&str> = bk.symmetric_difference(&pk).copied().collect();
            diff.sort_unstable();
            bail!("segment ids differ between base and perturbed selections for method {method}: {diff:?}");
        }
        let mut verdicts = Vec::with_capacity(sels.len());
        for s in sels {
            let seg = lookup(&index, &s.segment_id)?;
            let reference = seg
                .reference
                .as_deref()
                .ok_or_else(|| anyhow!("segment `{}` has no reference", seg.id))?;
            let v = detect_hallucination(
                &s.segment_id,
                sentence_bleu(&s.chosen_text, reference),
                sentence_bleu(&p[s.segment_id.as_str()].chosen_text, reference),
                cfg.gate_bleu,
                cfg.hall_bleu,
            );
            verdicts.push(MethodVerdict { method: *method, verdict: v });
        }
        per_method.push((*method, verdicts));
    }
    if let Some((_, (method, _))) = pert.into_iter().next() {
        bail!("base selections have no rows for method {method}");
    }

    if cfg.joint_gate {
        let mut all_pass: HashMap<String, bool> = HashMap::new();
        for (_, vs) in &per_method {
            for v in vs {
                *all_pass.entry(v.verdict.segment_id.clone()).or_insert(true) &= v.verdict.passed_gate;
            }
        }
        for (_, vs) in &mut per_method {
            for v in vs.iter_mut() {
                let pass = all_pass[&v.verdict.segment_id];
                v.verdict.passed_gate = pass;
                v.verdict.is_hallucination &= pass;
            }
        }
    }

    let rows: Vec<Vec<String>> = per_method
        .iter()
        .map(|(method, vs)| {
            let r = hallucination_rate(vs.iter().map(|v| &v.verdict));
            vec![
                method.to_string(),
                vs.len().to_string(),
                r.passed_gate.to_string(),
                r.hallucinations.to_string(),
                r.percent.to_string(),
                r.empty_denominator.to_string(),
            ]
        })
        .collect();
    let stamp = cfg.stamp();
    write_csv(
        out,
        &["method", "segments", "passed_gate", "hallucinations", "rate", "empty_denominator"],
        &rows,
        &stamp,
    )?;
    let verdicts: Vec<MethodVerdict> = per_method.into_iter().flat_map(|(_, vs)| vs).collect();
    write_stamped(&sidecar(out, "verdicts"), &verdicts, &stamp)
}

/// Off-target rate per method.
///
/// The expected language is `expected` when given, otherwise each segment's
/// target language from `sources`.
pub fn cmd_langid_report(
    cfg: &RunConfig,
    svc: &Services,
    selections: &Path,
    sources: Option<&Path>,
    expected: Option<&str>,
    out: &Path,
) -> Result<()> {
    let groups = by_method(load_selections(selections)?);
    let segments = match sources {
        Some(p) => load_segments(p)?,
        None => Vec::new(),
    };
    let index = segment_index(&segments);
    let identifier = svc.langid()?;
    let mut rows = Vec::new();
    for (method, sels) in groups.values() {
        let want: Vec<&str> = sels
            .iter()
            .map(|s| match expected {
                Some(code) => Ok(code),
                None => Ok(lookup(&index, &s.segment_id)?.tgt_lang.as_str()),
            })
            .collect::<Result<_>>()
            .context("no --expected-lang given, so every selection needs a source segment")?;
        let texts: Vec<&str> = sels.iter().map(|s| s.chosen_text.as_str()).collect();
        let labels = identifier.identify_batch(&texts)?;
        let wrong = labels.iter().zip(&want).filter(|(got, want)| got.as_str() != **want).count();
        rows.push(vec![
            method.to_string(),
            sels.len().to_string(),
            wrong.to_string(),
            (100.0 * wrong as f64 / sels.len() as f64).to_string(),
        ]);
    }
    write_csv(out, &["method", "segments", "wrong_language", "rate"], &rows, &cfg.stamp())
}

/// Token totals of each ledger and its cost relative to `baseline`.
pub fn cmd_cost_report(cfg: &RunConfig, ledgers: &[PathBuf], baseline: &Path, out: &Path) -> Result<()> {
    let base = CostLedger::from_records(load_records(baseline)?);
    let mut rows = Vec::with_capacity(ledgers.len());
    for path in ledgers {
        let l = CostLedger::from_records(load_records(path)?);
        let rel = relative_cost(&l, &base)?;
        rows.push(vec![
            path.display().to_string(),
            l.prompt_tokens().to_string(),
            l.completion_tokens().to_string(),
            l.total_tokens().to_string(),
            rel.to_string(),
            format!("{rel:.2}"),
        ]);
    }
    write_csv(
        out,
        &["ledger", "prompt_tokens", "completion_tokens", "total_tokens", "relative_cost", "relative_cost_rounded"],
        &rows,
        &cfg.stamp(),
    )
}
