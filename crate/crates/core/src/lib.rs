//! Boundary-driven symmetric simple exclusion on `{1, ..., N-1}`.
//!
//! - [`process`]: exact continuous-time simulation.
//! - [`exact`]: dense generator and exact stationary law for small chains.
//! - [`pde`]: semidiscrete heat flow, triangle Laplacian, correlation dynamics.
//! - [`spectral`]: sine basis on `[0, 1]` and continuum covariance formulas.
//! - [`stats`]: fluctuation fields, replica ensembles, estimators, diagnostics.
//! - [`ou`]: Galerkin truncation of the limiting Ornstein-Uhlenbeck equation.
//! - [`io`]: CSV dumps.

pub mod exact;
pub mod io;
pub mod ou;
pub mod pde;
pub mod process;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use pde::{Profile1D, TriangleField};
pub use process::{BoundaryParams, LatticeConfig};
