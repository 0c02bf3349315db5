//! Batch pipeline behind the `mt-ensemble` binary.
//!
//! Subcommands are plain functions over a resolved [`RunConfig`] and a set of
//! [`Services`], so tests can run them against in-process stubs.

mod commands;
mod config;
mod services;

pub use commands::{
    cmd_cost_report, cmd_diversity, cmd_ensemble, cmd_generate, cmd_hallucination_report, cmd_langid_report,
    cmd_perturb, cmd_sweep_temperature, mbr_with_diversity, sidecar, MethodVerdict,
};
pub use config::{Overrides, RunConfig, SamplingSection, Stamp, Stamped, N_PRESETS};
pub use services::{resolve_backend, resolve_langid, resolve_utility, Services, DEFAULT_NOISE_SCALE};
