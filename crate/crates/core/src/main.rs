use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mt_ensemble::cli::{self, Overrides, RunConfig, Services};
use mt_ensemble::data::{load_segments, Method, SourceSegment};
use mt_ensemble::genkit::{SamplingMode, TemplateId};
use mt_ensemble::robustness::PerturbationKind;

#[derive(Parser)]
#[command(name = "mt-ensemble", version, about = "Hypothesis ensembling for LLM machine translation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Selection method for `ensemble`.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// MBR utility (chrf, bleu, stub:chrf, cmd:…, tcp:…).
    #[arg(long, global = true)]
    utility: Option<String>,
    /// Reference-free QE scorer for ranking.
    #[arg(long, global = true)]
    scorer: Option<String>,
    /// Reference-based metric for oracle selection.
    #[arg(long, global = true)]
    metric: Option<String>,
    /// Completion backend (http(s)://…, stub:echo, stub:fixed=<text>, stub:noisy[=<scale>]).
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    template: Option<TemplateId>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<SamplingMode>,
    #[arg(long, global = true)]
    n: Option<u32>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long = "top-p", global = true)]
    top_p: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "gate-bleu", global = true)]
    gate_bleu: Option<f64>,
    #[arg(long = "hall-bleu", global = true)]
    hall_bleu: Option<f64>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Language identifier endpoint.
    #[arg(long, global = true)]
    langid: Option<String>,
}

fn parse_mode(s: &str) -> Result<SamplingMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown sampling mode `{s}` (greedy, unbiased, biased, custom)"))
}

#[derive(Subcommand)]
enum Command {
    /// Sample hypothesis sets for source segments.
    Generate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select one output per hypothesis set.
    Ensemble {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sources: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write MBR utility matrices here.
        #[arg(long)]
        matrices: Option<PathBuf>,
    },
    /// Per-segment hypothesis diversity as CSV.
    Diversity {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sources: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perturb source sentences.
    Perturb {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kind: PerturbationKind,
        /// Frequent tokens for insertion, one per line.
        #[arg(long)]
        tokens: Option<PathBuf>,
    },
    /// Diversity and selection quality across sampling temperatures.
    SweepTemperature {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        temps: Vec<f64>,
    },
    /// Hallucination rates per method under source perturbation.
    HallucinationReport {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        perturbed: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Gate a segment only when every method passes.
        #[arg(long)]
        joint_gate: bool,
    },
    /// Off-target language rate per method.
    LangidReport {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sources: Option<PathBuf>,
        #[arg(long = "expected-lang")]
        expected_lang: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Token cost of ledgers relative to a baseline ledger.
    CostReport {
        #[arg(long = "in", required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn overrides(g: &Global) -> Overrides {
    Overrides {
        seed: g.seed,
        parallelism: g.parallelism,
        backend: g.backend.clone(),
        template: g.template,
        mode: g.mode,
        n: g.n,
        temperature: g.temperature,
        top_p: g.top_p,
        utility: g.utility.clone(),
        scorer: g.scorer.clone(),
        metric: g.metric.clone(),
        langid: g.langid.clone(),
        gate_bleu: g.gate_bleu,
        hall_bleu: g.hall_bleu,
    }
}

fn with_backend(cfg: &RunConfig, segments: &[SourceSegment]) -> Result<Services> {
    Ok(Services {
        backend: Some(cli::resolve_backend(&cfg.backend, cfg.seed, segments)?),
        ..Default::default()
    })
}

fn run(args: Cli) -> Result<()> {
    let mut cfg = RunConfig::resolve(args.global.config.as_deref(), &overrides(&args.global))?;
    match args.command {
        Command::Generate { input, out } => {
            let segments = load_segments(&input)?;
            let svc = with_backend(&cfg, &segments)?;
            cli::cmd_generate(&cfg, &svc, &input, &out)
        }
        Command::Ensemble {
            input,
            sources,
            out,
            matrices,
        } => {
            let Some(method) = args.global.method else {
                bail!("ensemble needs --method");
            };
            let mut svc = Services::default();
            match method {
                Method::Mbr => svc.utility = Some(cli::resolve_utility(&cfg.utility)?),
                Method::Rank => {
                    let spec = cfg.qe_scorer.as_deref().context("rank needs a QE scorer (--scorer)")?;
                    svc.qe = Some(cli::resolve_utility(spec)?);
                }
                Method::Oracle => svc.metric = Some(cli::resolve_utility(&cfg.oracle_metric)?),
                Method::ChooseBest | Method::GenerateBest => {
                    svc = with_backend(&cfg, &load_segments(&sources)?)?;
                }
                Method::Greedy | Method::Sample => {}
            }
            cli::cmd_ensemble(&cfg, &svc, method, &input, &sources, &out, matrices.as_deref())
        }
        Command::Diversity { input, sources, out } => {
            let svc = Services {
                utility: Some(cli::resolve_utility(&cfg.utility)?),
                ..Default::default()
            };
            cli::cmd_diversity(&cfg, &svc, &input, sources.as_deref(), &out)
        }
        Command::Perturb {
            input,
            out,
            kind,
            tokens,
        } => cli::cmd_perturb(&cfg, kind, &input, tokens.as_deref(), &out),
        Command::SweepTemperature { input, out, temps } => {
            let segments = load_segments(&input)?;
            let mut svc = with_backend(&cfg, &segments)?;
            svc.utility = Some(cli::resolve_utility(&cfg.utility)?);
            if let Some(spec) = &cfg.qe_scorer {
                svc.qe = Some(cli::resolve_utility(spec)?);
            }
            cli::cmd_sweep_temperature(&cfg, &svc, &input, &temps, &out)
        }
        Command::HallucinationReport {
            base,
            perturbed,
            refs,
            out,
            joint_gate,
        } => {
            cfg.joint_gate |= joint_gate;
            cli::cmd_hallucination_report(&cfg, &base, &perturbed, &refs, &out)
        }
        Command::LangidReport {
            input,
            sources,
            expected_lang,
            out,
        } => {
            let spec = cfg.langid.as_deref().context("langid-report needs --langid")?;
            let svc = Services {
                langid: Some(cli::resolve_langid(spec)?),
                ..Default::default()
            };
            cli::cmd_langid_report(&cfg, &svc, &input, sources.as_deref(), expected_lang.as_deref(), &out)
        }
        Command::CostReport { input, baseline, out } => cli::cmd_cost_report(&cfg, &input, &baseline, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mt-ensemble: {e:#}");
            ExitCode::FAILURE
        }
    }
}
