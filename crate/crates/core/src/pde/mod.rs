//! Deterministic discrete problems: the semidiscrete heat equation on the
//! chain, and the absorbed Laplacian on the triangle `0 < x < y < N` that
//! governs two-point correlations.

mod heat;
mod parabolic;
mod profile;
mod triangle;

pub use heat::{
    discrete_mode_rate, gradient_maxprinciple_check, laplacian_1d, solve_heat_1d, GradientReport, HeatFlow,
};
pub use parabolic::{
    correlation_evolution, solve_parabolic_triangle, CorrelationRun, ParabolicOptions, ParabolicRun, TimeScheme,
};
pub use profile::Profile1D;
pub use triangle::{
    green_closed_form, laplacian_triangle, solve_green_triangle, DiagonalSource, TriangleField, TriangleOperator,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("implicit step rejected: residual {residual:e} exceeds 1e-10")]
    StepRejected { residual: f64 },
    #[error("time refinement stalled at {steps} steps: successive solutions differ by {diff:e}")]
    RefinementFailed { steps: usize, diff: f64 },
    #[error("gradient maximum principle violated at tau = {tau}, x = {x}: {value} > {bound}")]
    GradientBound { tau: f64, x: usize, value: f64, bound: f64 },
    #[error("correlation bound violated: sup norm {sup:e} > {bound:e}")]
    CorrelationBound { sup: f64, bound: f64 },
}
