//! Experiment driver for `ssep-core`: configuration, one experiment per
//! subcommand, CSV/JSON outputs and run manifests.

pub mod config;
pub mod experiments;
pub mod report;

use std::time::Instant;

use thiserror::Error;

use ssep_core::exact::ExactError;
use ssep_core::ou::OuError;
use ssep_core::pde::PdeError;
use ssep_core::spectral::SpectralError;
use ssep_core::stats::StatsError;

pub use config::{Cli, Command, Format, Resolved, RunConfig};
pub use report::{CriterionKind, CriterionOutcome, Report, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Ou(#[from] OuError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 4,
            CliError::Stats(StatsError::InvalidSpec(_)) => 4,
            _ => 3,
        }
    }
}

/// Runs the experiment and, if `out` is set, writes its outputs.
pub fn execute(cfg: &Resolved) -> Result<(Report, Option<RunManifest>), CliError> {
    let start = Instant::now();
    let report = experiments::run(cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    let manifest = match &cfg.out {
        Some(dir) => Some(report::write_outputs(dir, &cfg.to_config(), cfg.format, &report, elapsed)?),
        None => None,
    };
    Ok((report, manifest))
}
