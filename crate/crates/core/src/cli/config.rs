//! Run configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::genkit::{SamplingConfig, SamplingMode, TemplateId};
use crate::robustness::{DEFAULT_CEILING, DEFAULT_GATE};

/// Sample-count presets.
pub const N_PRESETS: [u32; 3] = [5, 20, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub mode: SamplingMode,
    pub n: u32,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: u32,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            mode: SamplingMode::Unbiased,
            n: N_PRESETS[0],
            temperature: None,
            top_p: None,
            max_tokens: crate::genkit::SamplingConfig::greedy().max_tokens,
        }
    }
}

/// Everything that determines a run's outputs besides its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub parallelism: usize,
    /// `http(s)://…` endpoint, or `stub:echo`, `stub:fixed=<text>`, `stub:noisy[=<scale>]`.
    pub backend: String,
    /// Prompt templates; more than one concatenates their samples.
    pub templates: Vec<TemplateId>,
    /// JSONL file of `{"source":…,"translation":…}` few-shot examples.
    pub shots: Option<PathBuf>,
    pub sampling: SamplingSection,
    /// MBR utility: `chrf`, `bleu`, `stub:chrf`, `cmd:<command>`, `tcp:<addr>`.
    pub utility: String,
    /// Reference-free scorer for ranking: `stub:qe-table=<path>`, `cmd:…`, `tcp:…`.
    pub qe_scorer: Option<String>,
    /// Reference-based metric for oracle selection.
    pub oracle_metric: String,
    /// Language identifier: `stub:script[=<latin>,<cyrillic>]`, `stub:const=<code>`, `cmd:…`, `tcp:…`.
    pub langid: Option<String>,
    pub mbr_exclude_self: bool,
    pub pseudo_references: Option<usize>,
    pub gate_bleu: f64,
    pub hall_bleu: f64,
    /// Gate a segment only when every method passes it.
    pub joint_gate: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            parallelism: 4,
            backend: "stub:echo".into(),
            templates: vec![TemplateId::Hendy],
            shots: None,
            sampling: SamplingSection::default(),
            utility: "chrf".into(),
            qe_scorer: None,
            oracle_metric: "chrf".into(),
            langid: None,
            mbr_exclude_self: false,
            pseudo_references: None,
            gate_bleu: DEFAULT_GATE,
            hall_bleu: DEFAULT_CEILING,
            joint_gate: false,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub backend: Option<String>,
    pub template: Option<TemplateId>,
    pub mode: Option<SamplingMode>,
    pub n: Option<u32>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub utility: Option<String>,
    pub scorer: Option<String>,
    pub metric: Option<String>,
    pub langid: Option<String>,
    pub gate_bleu: Option<f64>,
    pub hall_bleu: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&body).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn resolve(file: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.parallelism {
            cfg.parallelism = v;
        }
        if let Some(v) = &o.backend {
            cfg.backend = v.clone();
        }
        if let Some(v) = o.template {
            cfg.templates = vec![v];
        }
        if let Some(v) = o.mode {
            cfg.sampling.mode = v;
        }
        if let Some(v) = o.n {
            cfg.sampling.n = v;
        }
        if let Some(v) = o.temperature {
            cfg.sampling.temperature = Some(v);
        }
        if let Some(v) = o.top_p {
            cfg.sampling.top_p = Some(v);
        }
        if let Some(v) = &o.utility {
            cfg.utility = v.clone();
        }
        if let Some(v) = &o.scorer {
            cfg.qe_scorer = Some(v.clone());
        }
        if let Some(v) = &o.metric {
            cfg.oracle_metric = v.clone();
        }
        if let Some(v) = &o.langid {
            cfg.langid = Some(v.clone());
        }
        if let Some(v) = o.gate_bleu {
            cfg.gate_bleu = v;
        }
        if let Some(v) = o.hall_bleu {
            cfg.hall_bleu = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallelism == 0 {
            bail!("parallelism must be >= 1");
        }
        if self.templates.is_empty() {
            bail!("at least one template is required");
        }
        if let Some(t) = self.templates.iter().find(|t| !t.is_translation()) {
            bail!("`{t}` is not a translation template");
        }
        self.sampling_config()?;
        Ok(())
    }

    /// Sampling parameters from the mode preset, with explicit values on top.
    ///
    /// An explicit temperature or top-p that differs from the preset turns
    /// the mode into `custom`.
    pub fn sampling_config(&self) -> Result<SamplingConfig> {
        let s = &self.sampling;
        let mut cfg = match s.mode {
            SamplingMode::Greedy => SamplingConfig::greedy(),
            SamplingMode::Unbiased => SamplingConfig::unbiased(s.n),
            SamplingMode::Biased => SamplingConfig::biased(s.n),
            SamplingMode::Custom => SamplingConfig::custom(1.0, 1.0, s.n),
        };
        cfg.max_tokens = s.max_tokens;
        if let Some(t) = s.temperature {
            if t != cfg.temperature {
                cfg.mode = SamplingMode::Custom;
                cfg.temperature = t;
            }
        }
        if let Some(p) = s.top_p {
            if p != cfg.top_p {
                cfg.mode = SamplingMode::Custom;
                cfg.top_p = p;
            }
        }
        if cfg.mode == SamplingMode::Greedy && s.n != 1 && s.n != SamplingSection::default().n {
            bail!("greedy sampling draws exactly one hypothesis, got n = {}", s.n);
        }
        cfg.validate().map_err(|e| anyhow::anyhow!(e))?;
        Ok(cfg)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn stamp(&self) -> Stamp {
        Stamp {
            config_hash: self.hash(),
            seed: self.seed,
        }
    }
}

/// Provenance fields appended to every output record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

/// A record followed by the run stamp; readers ignore the extra fields.
#[derive(Debug, Serialize)]
pub struct Stamped<'a, T: Serialize> {
    #[serde(flatten)]
    pub record: &'a T,
    #[serde(flatten)]
    pub stamp: &'a Stamp,
}
