//! Covariances of the limiting Gaussian fluctuation field.

use std::f64::consts::PI;

use super::basis::{eigenfunction, eigenfunction_derivative, eigenvalue, ModeVector};
use super::quadrature::{adaptive_simpson, GaussLegendre};
use super::SpectralError;
use crate::process::BoundaryParams;

/// `chi(rho_bar(u)) = a + b u + c u^2` for the linear stationary profile.
pub fn chi_quadratic(bp: &BoundaryParams) -> [f64; 3] {
    let (al, d) = (bp.alpha(), bp.beta() - bp.alpha());
    [al * (1.0 - al), d * (1.0 - 2.0 * al), -d * d]
}

/// `int_0^1 u^m cos(w u) du` for `m <= 2`.
fn cos_moment(m: usize, w: f64) -> f64 {
    if w == 0.0 {
        return 1.0 / (m + 1) as f64;
    }
    let (s, c) = w.sin_cos();
    match m {
        0 => s / w,
        1 => s / w + (c - 1.0) / (w * w),
        2 => s / w + 2.0 * c / (w * w) - 2.0 * s / (w * w * w),
        _ => unreachable!("only quadratic weights are needed"),
    }
}

fn quadratic_cos(q: &[f64; 3], w: f64) -> f64 {
    (0..3).map(|m| q[m] * cos_moment(m, w)).sum()
}

/// `int q(u) e_j(u) e_k(u) du` for a quadratic `q`, in closed form.
fn quadratic_sine_product(q: &[f64; 3], j: usize, k: usize) -> f64 {
    let d = (j as f64 - k as f64).abs() * PI;
    let s = (j + k) as f64 * PI;
    quadratic_cos(q, d) - quadratic_cos(q, s)
}

/// `int q(u) e_j'(u) e_k'(u) du` for a quadratic `q`, in closed form.
fn quadratic_cosine_product(q: &[f64; 3], j: usize, k: usize) -> f64 {
    let d = (j as f64 - k as f64).abs() * PI;
    let s = (j + k) as f64 * PI;
    (j * k) as f64 * PI * PI * (quadratic_cos(q, d) + quadratic_cos(q, s))
}

/// Stationary covariance of the limiting field between `e_j` and `e_k`:
/// `int chi(rho_bar) e_j e_k du - (beta - alpha)^2 delta_jk / (j pi)^2`.
pub fn stationary_covariance(j: usize, k: usize, bp: &BoundaryParams) -> f64 {
    assert!(j >= 1 && k >= 1);
    let q = chi_quadratic(bp);
    let mut v = quadratic_sine_product(&q, j, k);
    if j == k {
        v -= (bp.beta() - bp.alpha()).powi(2) / eigenvalue(j);
    }
    v
}

/// The same quantity with the space integral done by Gauss–Legendre.
pub fn stationary_covariance_quadrature(j: usize, k: usize, bp: &BoundaryParams) -> f64 {
    let rule = GaussLegendre::new(64);
    let panels = (j + k).div_ceil(16).max(2);
    let (al, be) = (bp.alpha(), bp.beta());
    let mut v = rule.integrate(0.0, 1.0, panels, |u| {
        let r = al + (be - al) * u;
        r * (1.0 - r) * eigenfunction(j, u) * eigenfunction(k, u)
    });
    if j == k {
        v -= (be - al).powi(2) / eigenvalue(j);
    }
    v
}

/// `J x J` row-major matrix of [`stationary_covariance`].
pub fn stationary_covariance_matrix(j_max: usize, bp: &BoundaryParams) -> Vec<f64> {
    let mut m = vec![0.0; j_max * j_max];
    for j in 1..=j_max {
        for k in j..=j_max {
            let v = stationary_covariance(j, k, bp);
            m[(j - 1) * j_max + k - 1] = v;
            m[(k - 1) * j_max + j - 1] = v;
        }
    }
    m
}

/// `int chi(rho_bar) e_j' e_k' du` in closed form (linear stationary profile).
pub fn stationary_gradient_weight(j: usize, k: usize, bp: &BoundaryParams) -> f64 {
    quadratic_cosine_product(&chi_quadratic(bp), j, k)
}

/// Number of modes kept for the heat-flow reconstruction by default.
pub const J_HEAT: usize = 64;

/// Continuum density `rho(t, u)` solving the heat equation with boundary
/// values `alpha`, `beta`, stored as sine coefficients of `rho_0 - rho_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumProfile {
    bp: BoundaryParams,
    coeffs: ModeVector,
    tail: f64,
}

impl ContinuumProfile {
    /// The stationary linear profile.
    pub fn stationary(bp: &BoundaryParams) -> Self {
        Self { bp: *bp, coeffs: ModeVector::new(vec![0.0; 1]), tail: 0.0 }
    }

    /// From explicit coefficients; `tail` bounds `sup_u |sum_{n>J} c_n e_n(u)|`.
    pub fn from_coefficients(bp: &BoundaryParams, coeffs: ModeVector, tail: f64) -> Self {
        Self { bp: *bp, coeffs, tail }
    }

    /// Projects `rho_0 - rho_bar` onto `j_heat` modes. The tail is estimated
    /// from the next `j_heat` coefficients as `sqrt(2) sum |c_n|`.
    pub fn from_fn(bp: &BoundaryParams, rho0: impl Fn(f64) -> f64, j_heat: usize) -> Self {
        let (al, be) = (bp.alpha(), bp.beta());
        let all = super::SineBasis::new(2 * j_heat).project(|u| rho0(u) - (al + (be - al) * u));
        let tail = 2f64.sqrt() * all.coeffs()[j_heat..].iter().map(|c| c.abs()).sum::<f64>();
        let coeffs = ModeVector::new(all.coeffs()[..j_heat].to_vec());
        Self { bp: *bp, coeffs, tail }
    }

    /// `gamma(u) = alpha + (beta - alpha) u^2`, with exact coefficients
    /// `<gamma - rho_bar, e_n> = -(beta - alpha) 2 sqrt(2) (1 - (-1)^n) / (n pi)^3`.
    pub fn quadratic(bp: &BoundaryParams, j_heat: usize) -> Self {
        let d = bp.beta() - bp.alpha();
        let coeff = |n: usize| {
            if n.is_multiple_of(2) {
                0.0
            } else {
                -d * 4.0 * 2f64.sqrt() / (n as f64 * PI).powi(3)
            }
        };
        let coeffs = ModeVector::new((1..=j_heat).map(coeff).collect());
        // sqrt(2) sum_{n > J, odd} |c_n|, summed far enough that the rest is below 1e-16.
        let tail = (j_heat + 1..200_000).map(|n| 2f64.sqrt() * coeff(n).abs()).sum();
        Self { bp: *bp, coeffs, tail }
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.bp
    }

    pub fn coefficients(&self) -> &ModeVector {
        &self.coeffs
    }

    /// Bound on the reconstruction error from the neglected modes (at `t = 0`;
    /// it only shrinks afterwards).
    pub fn truncation_tail(&self) -> f64 {
        self.tail
    }

    pub fn density(&self, t: f64, u: f64) -> f64 {
        let (al, be) = (self.bp.alpha(), self.bp.beta());
        let dev: f64 = self
            .coeffs
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| c * (-eigenvalue(i + 1) * t).exp() * eigenfunction(i + 1, u))
            .sum();
        al + (be - al) * u + dev
    }

    pub fn chi(&self, t: f64, u: f64) -> f64 {
        let r = self.density(t, u);
        r * (1.0 - r)
    }

    /// Checks `0 <= rho(t, u) <= 1` (to 1e-8) at `samples` evenly spaced points.
    pub fn check_admissible(&self, t: f64, samples: usize) -> Result<(), SpectralError> {
        for i in 0..=samples {
            let u = i as f64 / samples as f64;
            let r = self.density(t, u);
            if !(-1e-8..=1.0 + 1e-8).contains(&r) {
                return Err(SpectralError::Inadmissible { t, u, value: r });
            }
        }
        Ok(())
    }

    fn grid(&self, rule: &GaussLegendre, panels: usize) -> ProfileGrid {
        let (xs, ws) = rule.composite(0.0, 1.0, panels);
        let m = self.coeffs.len();
        let sines = xs
            .iter()
            .flat_map(|&u| (1..=m).map(move |n| eigenfunction(n, u)))
            .collect();
        ProfileGrid { xs, ws, sines, modes: m }
    }
}

// Quadrature nodes with the basis functions tabulated once.
struct ProfileGrid {
    xs: Vec<f64>,
    ws: Vec<f64>,
    // sines[i * modes + n - 1] = e_n(xs[i])
    sines: Vec<f64>,
    modes: usize,
}

impl ProfileGrid {
    fn chi_values(&self, cp: &ContinuumProfile, t: f64) -> Vec<f64> {
        let (al, be) = (cp.bp.alpha(), cp.bp.beta());
        let decayed: Vec<f64> = cp
            .coeffs
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c * (-eigenvalue(i + 1) * t).exp())
            .collect();
        self.xs
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let row = &self.sines[i * self.modes..(i + 1) * self.modes];
                let r = al + (be - al) * u + row.iter().zip(&decayed).map(|(s, c)| s * c).sum::<f64>();
                r * (1.0 - r)
            })
            .collect()
    }
}

fn quadrature_panels(cp: &ContinuumProfile, j_max: usize) -> usize {
    (2 * cp.coeffs.len() + 2 * j_max).div_ceil(24).max(2)
}

/// `J x J` matrix `int chi(rho(t, u)) e_j'(u) e_k'(u) du`, row-major.
pub fn gradient_weight_matrix(j_max: usize, cp: &ContinuumProfile, t: f64) -> Vec<f64> {
    let rule = GaussLegendre::new(64);
    let grid = cp.grid(&rule, quadrature_panels(cp, j_max));
    gradient_weights_on(&grid, cp, j_max, t)
}

fn gradient_weights_on(grid: &ProfileGrid, cp: &ContinuumProfile, j_max: usize, t: f64) -> Vec<f64> {
    let chi = grid.chi_values(cp, t);
    let derivs: Vec<Vec<f64>> = (1..=j_max)
        .map(|j| grid.xs.iter().map(|&u| eigenfunction_derivative(j, u)).collect())
        .collect();
    let mut m = vec![0.0; j_max * j_max];
    for a in 0..j_max {
        for b in a..j_max {
            let v: f64 = grid
                .ws
                .iter()
                .zip(&chi)
                .zip(derivs[a].iter().zip(&derivs[b]))
                .map(|((w, c), (da, db))| w * c * da * db)
                .sum();
            m[a * j_max + b] = v;
            m[b * j_max + a] = v;
        }
    }
    m
}

fn initial_weights_on(grid: &ProfileGrid, cp: &ContinuumProfile, j_max: usize) -> Vec<f64> {
    let chi = grid.chi_values(cp, 0.0);
    let mut m = vec![0.0; j_max * j_max];
    for a in 0..j_max {
        for b in a..j_max {
            let v: f64 = grid
                .xs
                .iter()
                .zip(&grid.ws)
                .zip(&chi)
                .map(|((&u, w), c)| w * c * eigenfunction(a + 1, u) * eigenfunction(b + 1, u))
                .sum();
            m[a * j_max + b] = v;
            m[b * j_max + a] = v;
        }
    }
    m
}

/// Tolerance of the time integral in [`dynamic_covariance_matrix`].
pub const TIME_TOLERANCE: f64 = 1e-10;

/// The two parts of the dynamic covariance, each `J x J` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicCovarianceParts {
    /// `int chi(gamma) (T_t e_j) (T_s e_k)`.
    pub initial: Vec<f64>,
    /// `2 int_0^s dr int chi(rho(r)) (grad T_{t-r} e_j) (grad T_{s-r} e_k)`.
    pub noise: Vec<f64>,
}

impl DynamicCovarianceParts {
    pub fn total(&self) -> Vec<f64> {
        self.initial.iter().zip(&self.noise).map(|(a, b)| a + b).collect()
    }
}

/// `E[Y_t(e_j) Y_s(e_k)]` for the limiting process started from the
/// product-measure fluctuations of `rho_0`, for `0 <= s <= t`.
pub fn dynamic_covariance_parts(
    t: f64,
    s: f64,
    j_max: usize,
    cp: &ContinuumProfile,
) -> Result<DynamicCovarianceParts, SpectralError> {
    if !(0.0 <= s && s <= t && t.is_finite()) {
        return Err(SpectralError::InvalidTime { t, s });
    }
    let rule = GaussLegendre::new(64);
    let grid = cp.grid(&rule, quadrature_panels(cp, j_max));
    let lam: Vec<f64> = (1..=j_max).map(eigenvalue).collect();
    let mut initial = initial_weights_on(&grid, cp, j_max);
    for a in 0..j_max {
        for b in 0..j_max {
            initial[a * j_max + b] *= (-lam[a] * t - lam[b] * s).exp();
        }
    }
    let noise = if s == 0.0 {
        vec![0.0; j_max * j_max]
    } else {
        let integrand = |r: f64| {
            let mut m = gradient_weights_on(&grid, cp, j_max, r);
            for a in 0..j_max {
                for b in 0..j_max {
                    m[a * j_max + b] *= 2.0 * (-lam[a] * (t - r) - lam[b] * (s - r)).exp();
                }
            }
            m
        };
        adaptive_simpson(integrand, 0.0, s, TIME_TOLERANCE).map_err(|f| SpectralError::Quadrature {
            achieved: f.achieved,
            requested: f.requested,
        })?
    };
    Ok(DynamicCovarianceParts { initial, noise })
}

/// Full `J x J` matrix of dynamic covariances.
pub fn dynamic_covariance_matrix(t: f64, s: f64, j_max: usize, cp: &ContinuumProfile) -> Result<Vec<f64>, SpectralError> {
    Ok(dynamic_covariance_parts(t, s, j_max, cp)?.total())
}

/// Single entry of [`dynamic_covariance_matrix`].
pub fn dynamic_covariance(t: f64, s: f64, j: usize, k: usize, cp: &ContinuumProfile) -> Result<f64, SpectralError> {
    let jm = j.max(k);
    Ok(dynamic_covariance_matrix(t, s, jm, cp)?[(j - 1) * jm + k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bp(a: f64, b: f64) -> BoundaryParams {
        BoundaryParams::new(a, b).unwrap()
    }

    #[test]
    fn cos_moments_against_quadrature() {
        let rule = GaussLegendre::new(64);
        for &w in &[0.0, 0.5, PI, 7.0 * PI, 31.0] {
            for m in 0..3 {
                let q = rule.integrate(0.0, 1.0, 2, |u| u.powi(m as i32) * (w * u).cos());
                assert!((cos_moment(m, w) - q).abs() < 1e-13, "m={m} w={w}");
            }
        }
    }

    #[test]
    fn stationary_examples() {
        let half = bp(0.5, 0.5);
        for j in 1..5 {
            for k in 1..5 {
                let expect = if j == k { 0.25 } else { 0.0 };
                assert!((stationary_covariance(j, k, &half) - expect).abs() < 1e-14);
            }
        }
        let full = bp(0.0, 1.0);
        let v = stationary_covariance(1, 1, &full);
        assert!((v - (1.0 / 6.0 - 1.0 / (2.0 * PI * PI))).abs() < 1e-14);
        assert!((v - 0.11601).abs() < 1e-5);
        assert!(stationary_covariance(1, 2, &full).abs() < 1e-15);
    }

    #[test]
    fn closed_form_agrees_with_quadrature() {
        for &(a, b) in &[(0.1, 0.9), (0.0, 1.0), (0.7, 0.2)] {
            let p = bp(a, b);
            for j in 1..=12 {
                for k in 1..=12 {
                    let d = stationary_covariance(j, k, &p) - stationary_covariance_quadrature(j, k, &p);
                    assert!(d.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gradient_weights_closed_form() {
        let p = bp(0.0, 1.0);
        let cp = ContinuumProfile::stationary(&p);
        let m = gradient_weight_matrix(6, &cp, 0.3);
        for j in 1..=6 {
            for k in 1..=6 {
                let closed = stationary_gradient_weight(j, k, &p);
                assert!((m[(j - 1) * 6 + k - 1] - closed).abs() < 1e-11);
            }
        }
        // 2 pi^2 int u(1-u) 2 cos^2(pi u) du = 2 pi^2 (1/6 - 1/(2 pi^2))
        let b11 = 2.0 * stationary_gradient_weight(1, 1, &p);
        assert!((b11 - (PI * PI / 3.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn quadratic_profile_coefficients() {
        let p = bp(0.1, 0.9);
        let exact = ContinuumProfile::quadratic(&p, 32);
        let projected = ContinuumProfile::from_fn(&p, |u| 0.1 + 0.8 * u * u, 32);
        for n in 1..=32 {
            let d = exact.coefficients().get(n) - projected.coefficients().get(n);
            assert!(d.abs() < 1e-13);
        }
        assert!((exact.density(0.0, 0.5) - 0.3).abs() < 2.0 * exact.truncation_tail());
        assert!(exact.check_admissible(0.0, 200).is_ok());
        assert!(exact.truncation_tail() < 1e-4);
    }

    #[test]
    fn equilibrium_dynamic_covariance() {
        let g = 0.3;
        let cp = ContinuumProfile::stationary(&bp(g, g));
        let (t, s) = (0.04, 0.015);
        let m = dynamic_covariance_matrix(t, s, 3, &cp).unwrap();
        for j in 1..=3 {
            for k in 1..=3 {
                let expect = if j == k { g * (1.0 - g) * (-eigenvalue(j) * (t - s)).exp() } else { 0.0 };
                assert!((m[(j - 1) * 3 + k - 1] - expect).abs() < 1e-9, "{j} {k}");
            }
        }
    }

    #[test]
    fn time_zero_is_initial_weight() {
        let p = bp(0.1, 0.9);
        let cp = ContinuumProfile::quadratic(&p, 64);
        let v = dynamic_covariance(0.0, 0.0, 2, 3, &cp).unwrap();
        let rule = GaussLegendre::new(64);
        let direct = rule.integrate(0.0, 1.0, 4, |u| {
            let g = 0.1 + 0.8 * u * u;
            g * (1.0 - g) * eigenfunction(2, u) * eigenfunction(3, u)
        });
        assert!((v - direct).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_times() {
        let cp = ContinuumProfile::stationary(&bp(0.2, 0.4));
        assert!(dynamic_covariance(0.1, 0.2, 1, 1, &cp).is_err());
    }
}
