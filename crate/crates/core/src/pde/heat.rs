//! Semidiscrete heat equation `d/ds rho = Delta_N rho` with clamped ends,
//! solved exactly in the discrete sine basis.

use std::f64::consts::PI;

use super::{PdeError, Profile1D};

/// `(Delta_N rho)(x) = N^2 [rho(x+1) + rho(x-1) - 2 rho(x)]` for `x = 1..N-1`.
pub fn laplacian_1d(p: &Profile1D) -> Vec<f64> {
    let n2 = (p.size() * p.size()) as f64;
    p.values().windows(3).map(|w| n2 * (w[0] + w[2] - 2.0 * w[1])).collect()
}

/// Decay rate `4 N^2 sin^2(k pi / 2N)` of the discrete sine mode `k`.
pub fn discrete_mode_rate(n: usize, k: usize) -> f64 {
    let nf = n as f64;
    4.0 * nf * nf * (k as f64 * PI / (2.0 * nf)).sin().powi(2)
}

/// Exact solution operator for one initial profile.
///
/// The deviation from the linear stationary profile is expanded once in
/// `sin(k pi x / N)`, `k = 1..N-1`; evaluating at any time is then O(N^2).
#[derive(Debug, Clone)]
pub struct HeatFlow {
    n: usize,
    alpha: f64,
    beta: f64,
    coeffs: Vec<f64>,
    rates: Vec<f64>,
    // sines[(k-1) * (N-1) + (x-1)] = sin(k pi x / N)
    sines: Vec<f64>,
}

impl HeatFlow {
    pub fn new(p0: &Profile1D) -> Self {
        let n = p0.size();
        let m = n - 1;
        let nf = n as f64;
        let (alpha, beta) = (p0.alpha(), p0.beta());
        let mut sines = vec![0.0; m * m];
        for k in 1..n {
            for x in 1..n {
                sines[(k - 1) * m + (x - 1)] = (PI * (k * x) as f64 / nf).sin();
            }
        }
        let dev: Vec<f64> = (1..n)
            .map(|x| p0.value(x) - (alpha + (beta - alpha) * x as f64 / nf))
            .collect();
        let coeffs = (0..m)
            .map(|k| 2.0 / nf * sines[k * m..(k + 1) * m].iter().zip(&dev).map(|(s, d)| s * d).sum::<f64>())
            .collect();
        let rates = (1..n).map(|k| discrete_mode_rate(n, k)).collect();
        Self { n, alpha, beta, coeffs, rates, sines }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Coefficient of `sin(k pi x / N)` in `rho_0 - rho_lin`.
    pub fn coefficient(&self, k: usize) -> f64 {
        self.coeffs[k - 1]
    }

    pub fn profile_at(&self, tau: f64) -> Profile1D {
        let n = self.n;
        let m = n - 1;
        let nf = n as f64;
        let mut interior: Vec<f64> = (1..n)
            .map(|x| self.alpha + (self.beta - self.alpha) * x as f64 / nf)
            .collect();
        for k in 0..m {
            let a = self.coeffs[k] * (-self.rates[k] * tau).exp();
            if a == 0.0 {
                continue;
            }
            for (v, s) in interior.iter_mut().zip(&self.sines[k * m..(k + 1) * m]) {
                *v += a * s;
            }
        }
        let mut values = Vec::with_capacity(n + 1);
        values.push(self.alpha);
        values.extend(interior);
        values.push(self.beta);
        Profile1D::new(values).expect("heat flow produced an invalid profile")
    }
}

/// `rho_tau` for the semidiscrete heat equation started at `p0`.
pub fn solve_heat_1d(p0: &Profile1D, tau: f64) -> Result<Profile1D, PdeError> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(PdeError::InvalidArgument(format!("tau must be finite and >= 0, got {tau}")));
    }
    Ok(HeatFlow::new(p0).profile_at(tau))
}

/// Outcome of a successful gradient maximum-principle check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    /// `max_x |grad_N rho_0(x)|`.
    pub initial_max: f64,
    /// `max` over sampled times of `max_x |grad_N rho_tau(x)|`.
    pub observed_max: f64,
}

const GRADIENT_TOLERANCE: f64 = 1e-9;

/// Checks that the largest discrete gradient (boundary differences included)
/// never grows along the heat flow.
pub fn gradient_maxprinciple_check(p0: &Profile1D, taus: &[f64]) -> Result<GradientReport, PdeError> {
    let flow = HeatFlow::new(p0);
    let initial_max = p0.max_abs_gradient();
    let mut observed_max: f64 = 0.0;
    for &tau in taus {
        if !(tau >= 0.0) {
            return Err(PdeError::InvalidArgument(format!("negative time {tau}")));
        }
        let grad = flow.profile_at(tau).gradient();
        for (x, g) in grad.iter().enumerate() {
            if g.abs() > initial_max + GRADIENT_TOLERANCE {
                return Err(PdeError::GradientBound { tau, x, value: g.abs(), bound: initial_max });
            }
            observed_max = observed_max.max(g.abs());
        }
    }
    Ok(GradientReport { initial_max, observed_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::BoundaryParams;
    use nalgebra::DMatrix;

    fn bp(a: f64, b: f64) -> BoundaryParams {
        BoundaryParams::new(a, b).unwrap()
    }

    #[test]
    fn linear_profile_is_harmonic() {
        let p = Profile1D::linear(17, &bp(0.1, 0.85));
        assert!(laplacian_1d(&p).iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn quadratic_has_constant_laplacian() {
        let n = 12;
        let p = Profile1D::new((0..=n).map(|x| (x as f64 / n as f64).powi(2)).collect()).unwrap();
        assert!(laplacian_1d(&p).iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn laplacian_matches_stencil() {
        let vals = vec![0.3, 0.9, 0.1, 0.4, 0.7];
        let p = Profile1D::new(vals.clone()).unwrap();
        let lap = laplacian_1d(&p);
        for x in 1..4 {
            let direct = 16.0 * (vals[x + 1] + vals[x - 1] - 2.0 * vals[x]);
            assert!((lap[x - 1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_profile_does_not_move() {
        let p = Profile1D::linear(20, &bp(0.3, 0.7));
        let q = solve_heat_1d(&p, 0.37).unwrap();
        assert!(p.sup_distance(&q) < 1e-14);
    }

    #[test]
    fn single_mode_decays_exactly() {
        let n = 8;
        let b = bp(0.2, 0.5);
        let lin = Profile1D::linear(n, &b);
        let p0 = Profile1D::from_interior(
            n,
            &b,
            &(1..n).map(|x| lin.value(x) + (PI * x as f64 / n as f64).sin()).collect::<Vec<_>>(),
        )
        .unwrap();
        let tau = 0.013;
        let p = solve_heat_1d(&p0, tau).unwrap();
        let decay = (-discrete_mode_rate(n, 1) * tau).exp();
        for x in 1..n {
            let expect = lin.value(x) + decay * (PI * x as f64 / n as f64).sin();
            assert!((p.value(x) - expect).abs() < 1e-10);
        }

        // Independent route: matrix exponential of the N^2-scaled
        // second-difference matrix by scaling and squaring.
        let m = n - 1;
        let mut a = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = -2.0 * (n * n) as f64;
            if i + 1 < m {
                a[(i, i + 1)] = (n * n) as f64;
                a[(i + 1, i)] = (n * n) as f64;
            }
        }
        let scaled = &a * (tau / 1024.0);
        let mut e = DMatrix::<f64>::identity(m, m);
        let mut term = DMatrix::<f64>::identity(m, m);
        for k in 1..30 {
            term = &term * &scaled / k as f64;
            e += &term;
        }
        for _ in 0..10 {
            e = &e * &e;
        }
        let dev0 = nalgebra::DVector::from_iterator(m, (1..n).map(|x| p0.value(x) - lin.value(x)));
        let dev = &e * dev0;
        for x in 1..n {
            assert!((p.value(x) - lin.value(x) - dev[x - 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn converges_to_linear_with_spectral_gap() {
        let n = 30;
        let b = bp(0.0, 1.0);
        let p0 = Profile1D::from_fn(n, &b, |u| (7.0 * u).sin().abs()).unwrap();
        let lin = Profile1D::linear(n, &b);
        let init = p0.sup_distance(&lin);
        for &tau in &[0.05, 0.2, 1.0, 3.0] {
            let d = solve_heat_1d(&p0, tau).unwrap().sup_distance(&lin);
            // sup norm bound through the l2 contraction: |d|_inf <= |d|_2 <= e^{-mu_1 t} |d0|_2
            let l2_bound = (-discrete_mode_rate(n, 1) * tau).exp() * init * ((n - 1) as f64).sqrt();
            assert!(d <= l2_bound + 1e-14, "tau {tau}: {d} > {l2_bound}");
        }
        assert!(solve_heat_1d(&p0, 5.0).unwrap().sup_distance(&lin) < 1e-12);
    }

    #[test]
    fn semigroup_property() {
        let n = 25;
        let b = bp(0.3, 0.9);
        let p0 = Profile1D::from_fn(n, &b, |u| 0.5 + 0.4 * (11.0 * u).cos()).unwrap();
        let ab = solve_heat_1d(&solve_heat_1d(&p0, 0.01).unwrap(), 0.03).unwrap();
        let direct = solve_heat_1d(&p0, 0.04).unwrap();
        assert!(ab.sup_distance(&direct) < 1e-10);
    }

    #[test]
    fn gradient_check_linear_is_tight() {
        let p = Profile1D::linear(10, &bp(0.2, 0.8));
        let r = gradient_maxprinciple_check(&p, &[0.0, 0.5, 1.0]).unwrap();
        assert!((r.initial_max - 0.6).abs() < 1e-12);
        assert!((r.observed_max - 0.6).abs() < 1e-9);
    }

    #[test]
    fn gradient_check_spike() {
        let n = 40;
        let mut vals = vec![0.5; n + 1];
        vals[n / 2] = 1.0;
        let p = Profile1D::new(vals).unwrap();
        let taus: Vec<f64> = (0..20).map(|i| i as f64 * 1e-4).collect();
        let r = gradient_maxprinciple_check(&p, &taus).unwrap();
        assert!((r.initial_max - 0.5 * n as f64).abs() < 1e-12);
    }
}
