use super::PdeError;
use crate::process::BoundaryParams;

/// Density on `0..=N` with the reservoir values held at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    values: Vec<f64>,
}

impl Profile1D {
    /// From all `N + 1` values; entry 0 and entry N are the boundary data.
    pub fn new(values: Vec<f64>) -> Result<Self, PdeError> {
        if values.len() < 3 {
            return Err(PdeError::InvalidProfile(format!(
                "need N >= 2, got {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PdeError::InvalidProfile("non-finite entry".into()));
        }
        Ok(Self { values })
    }

    /// The stationary profile `alpha + (beta - alpha) x / N`.
    pub fn linear(n: usize, bp: &BoundaryParams) -> Self {
        assert!(n >= 2, "N must be at least 2");
        let d = bp.beta() - bp.alpha();
        let values = (0..=n).map(|x| bp.alpha() + d * x as f64 / n as f64).collect();
        Self { values }
    }

    /// Interior values `f(x/N)`, boundary values from `bp`.
    pub fn from_fn(n: usize, bp: &BoundaryParams, f: impl Fn(f64) -> f64) -> Result<Self, PdeError> {
        let interior: Vec<f64> = (1..n).map(|x| f(x as f64 / n as f64)).collect();
        Self::from_interior(n, bp, &interior)
    }

    pub fn from_interior(n: usize, bp: &BoundaryParams, interior: &[f64]) -> Result<Self, PdeError> {
        if n < 2 || interior.len() != n - 1 {
            return Err(PdeError::InvalidProfile(format!(
                "expected {} interior values for N = {n}",
                n.saturating_sub(1)
            )));
        }
        let mut values = Vec::with_capacity(n + 1);
        values.push(bp.alpha());
        values.extend_from_slice(interior);
        values.push(bp.beta());
        Self::new(values)
    }

    /// System size `N`.
    pub fn size(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn value(&self, x: usize) -> f64 {
        self.values[x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values at `1..=N-1`.
    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    pub fn alpha(&self) -> f64 {
        self.values[0]
    }

    pub fn beta(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `(grad_N rho)(x) = N [rho(x+1) - rho(x)]` for `x = 0..N-1`,
    /// including both boundary differences.
    pub fn gradient(&self) -> Vec<f64> {
        let n = self.size() as f64;
        self.values.windows(2).map(|w| n * (w[1] - w[0])).collect()
    }

    pub fn max_abs_gradient(&self) -> f64 {
        self.gradient().iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Sup distance over all sites.
    pub fn sup_distance(&self, other: &Profile1D) -> f64 {
        assert_eq!(self.size(), other.size());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}
