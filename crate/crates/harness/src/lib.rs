//! Named, reproducible experiments over `shf-core` with tolerance
//! bookkeeping, kernel-table caching and append-only result directories.

pub mod cache;
pub mod config;
pub mod experiments;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

pub use cache::{default_cache_dir, KernelCache, CACHE_ENV};
pub use config::{ExperimentConfig, Overrides, Params, EXPERIMENTS};
pub use report::{Check, ExperimentReport, ReportBody, ResultRow, Rule};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] shf_core::Error),
    #[error("io error: {0}")]
    Io(String),
}

/// Runs one experiment. The report body depends only on the configuration.
pub fn run_experiment(cfg: &ExperimentConfig, cache: &KernelCache) -> Result<ExperimentReport, HarnessError> {
    cfg.params.validate()?;
    let start = Instant::now();
    cache.take_events();
    let out = experiments::run(&cfg.params, cfg.seed, cache)?;
    let passed = out.checks.iter().all(|c| c.passed);
    let body = ReportBody {
        experiment: cfg.name().to_string(),
        config_hash: cfg.hash(),
        config: cfg.identity(),
        checks: out.checks,
        rows: out.rows,
        notes: out.notes,
        artifacts: out.artifacts,
        passed,
    };
    Ok(ExperimentReport {
        body,
        row_wall_time_s: out.row_times,
        wall_time_s: start.elapsed().as_secs_f64(),
        cache_events: cache.take_events(),
    })
}

/// Runs an experiment and writes its run directory under `cfg.output_dir`.
pub fn run_and_write(cfg: &ExperimentConfig, cache: &KernelCache) -> Result<(ExperimentReport, PathBuf), HarnessError> {
    let report = run_experiment(cfg, cache)?;
    let dir = report.write(&cfg.output_dir, &cfg.to_toml())?;
    Ok((report, dir))
}
