//! Continuum spectral tools: the Dirichlet sine basis, the heat semigroup,
//! and the covariances of the limiting Gaussian field.

mod basis;
mod covariance;
mod quadrature;

use thiserror::Error;

pub use basis::{
    eigenfunction, eigenfunction_derivative, eigenvalue, green_kernel, inverse_laplacian, semigroup_apply,
    sobolev_norm, ModeVector, SineBasis, SobolevSign,
};
pub use covariance::{
    chi_quadratic, dynamic_covariance, dynamic_covariance_matrix, dynamic_covariance_parts, gradient_weight_matrix,
    stationary_covariance, stationary_covariance_matrix, stationary_covariance_quadrature, stationary_gradient_weight,
    ContinuumProfile, DynamicCovarianceParts, J_HEAT, TIME_TOLERANCE,
};
pub use quadrature::{adaptive_simpson, GaussLegendre, QuadratureFailure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("time integral reached {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },
    #[error("need 0 <= s <= t, got t = {t}, s = {s}")]
    InvalidTime { t: f64, s: f64 },
    #[error("density {value} outside [0, 1] at t = {t}, u = {u}")]
    Inadmissible { t: f64, u: f64, value: f64 },
}
