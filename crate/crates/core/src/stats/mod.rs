//! Fluctuation-field samples, replica ensembles, covariance estimation with
//! error bars, and the Gaussianity and martingale diagnostics.

mod ensemble;
mod estimate;
mod field;
mod martingale;

use thiserror::Error;

pub use ensemble::{
    density_estimate, run_ensemble, run_long_trajectory, DensityEstimate, EnsembleResult, EnsembleSpec,
    InitialCondition, Sampler, DEFAULT_BURN_IN,
};
pub use estimate::{
    compensated_mean, estimate_covariance, estimate_cross_covariance, gaussianity_check, CompensatedSum, Comparison,
    ComparisonEntry, CovarianceEstimate, GaussianityReport, ModeMoments, GAUSSIANITY_MIN_SAMPLES,
    GAUSSIANITY_THRESHOLD,
};
pub use field::{project_field, FieldSample, ModeProjector};
pub use martingale::{
    martingale_diagnostic, record_martingale, run_martingale_ensemble, MartingaleRecorder, MartingaleReport,
    MartingaleTrajectory,
};

use crate::process::ProcessError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("invalid ensemble specification: {0}")]
    InvalidSpec(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
}
