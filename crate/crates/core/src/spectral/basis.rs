//! Dirichlet sine basis on `[0, 1]` and operators diagonal in it.

use std::f64::consts::{PI, SQRT_2};

/// `lambda_n = (n pi)^2`, eigenvalue of `-Delta` for mode `n >= 1`.
#[inline]
pub fn eigenvalue(n: usize) -> f64 {
    let w = n as f64 * PI;
    w * w
}

/// `e_n(u) = sqrt(2) sin(n pi u)`.
#[inline]
pub fn eigenfunction(n: usize, u: f64) -> f64 {
    SQRT_2 * (n as f64 * PI * u).sin()
}

/// `e_n'(u) = sqrt(2) n pi cos(n pi u)`.
#[inline]
pub fn eigenfunction_derivative(n: usize, u: f64) -> f64 {
    let w = n as f64 * PI;
    SQRT_2 * w * (w * u).cos()
}

/// The first `J` modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SineBasis {
    j_max: usize,
}

impl SineBasis {
    pub fn new(j_max: usize) -> Self {
        assert!(j_max >= 1, "need at least one mode");
        Self { j_max }
    }

    pub fn len(&self) -> usize {
        self.j_max
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.j_max).map(eigenvalue).collect()
    }

    /// `sum_n c_n e_n(u)`.
    pub fn evaluate(&self, v: &ModeVector, u: f64) -> f64 {
        assert_eq!(v.len(), self.j_max);
        v.coeffs().iter().enumerate().map(|(i, c)| c * eigenfunction(i + 1, u)).sum()
    }

    /// Coefficients `<f, e_n>` by composite Gauss–Legendre quadrature.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> ModeVector {
        let rule = super::GaussLegendre::new(64);
        let panels = self.j_max.div_ceil(16).max(2);
        let (xs, ws) = rule.composite(0.0, 1.0, panels);
        let fx: Vec<f64> = xs.iter().map(|&u| f(u)).collect();
        let coeffs = (1..=self.j_max)
            .map(|n| xs.iter().zip(&ws).zip(&fx).map(|((&u, w), v)| w * v * eigenfunction(n, u)).sum())
            .collect();
        ModeVector::new(coeffs)
    }

    /// Gram matrix `<e_j, e_k>` by quadrature, row-major.
    pub fn gram_matrix(&self) -> Vec<f64> {
        let rule = super::GaussLegendre::new(64);
        let panels = self.j_max.div_ceil(16).max(2);
        let (xs, ws) = rule.composite(0.0, 1.0, panels);
        let j = self.j_max;
        let mut g = vec![0.0; j * j];
        for a in 0..j {
            for b in a..j {
                let v: f64 = xs
                    .iter()
                    .zip(&ws)
                    .map(|(&u, w)| w * eigenfunction(a + 1, u) * eigenfunction(b + 1, u))
                    .sum();
                g[a * j + b] = v;
                g[b * j + a] = v;
            }
        }
        g
    }
}

/// Coefficients `c_1..c_J` in the sine basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    coeffs: Vec<f64>,
}

impl ModeVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(coeffs.iter().all(|c| c.is_finite()), "mode coefficients must be finite");
        Self { coeffs }
    }

    /// The single mode `e_n` in a basis of length `j_max`.
    pub fn unit(j_max: usize, n: usize) -> Self {
        assert!(n >= 1 && n <= j_max);
        let mut coeffs = vec![0.0; j_max];
        coeffs[n - 1] = 1.0;
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `e_n`, `n >= 1`.
    pub fn get(&self, n: usize) -> f64 {
        self.coeffs[n - 1]
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn map_modes(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().map(|(i, &c)| f(i + 1, c)).collect() }
    }
}

/// Heat semigroup `T_t`: `c_n -> exp(-(n pi)^2 t) c_n`.
pub fn semigroup_apply(t: f64, v: &ModeVector) -> ModeVector {
    assert!(t >= 0.0, "semigroup time must be nonnegative");
    v.map_modes(|n, c| (-eigenvalue(n) * t).exp() * c)
}

/// `(-Delta)^{-1}`: `c_n -> c_n / (n pi)^2`.
pub fn inverse_laplacian(v: &ModeVector) -> ModeVector {
    v.map_modes(|n, c| c / eigenvalue(n))
}

/// Green kernel of `-Delta` with Dirichlet conditions: `u (1 - v)` for `u <= v`.
pub fn green_kernel(u: f64, v: f64) -> f64 {
    if u <= v {
        u * (1.0 - v)
    } else {
        v * (1.0 - u)
    }
}

/// Sign of the Sobolev index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobolevSign {
    Positive,
    Negative,
}

/// `(sum_n (n pi)^{+-2k} c_n^2)^{1/2}`.
pub fn sobolev_norm(v: &ModeVector, k: f64, sign: SobolevSign) -> f64 {
    let s = match sign {
        SobolevSign::Positive => k,
        SobolevSign::Negative => -k,
    };
    v.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| ((i + 1) as f64 * PI).powf(2.0 * s) * c * c)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GaussLegendre;

    #[test]
    fn orthonormal_to_quadrature_precision() {
        let b = SineBasis::new(32);
        let g = b.gram_matrix();
        for j in 0..32 {
            for k in 0..32 {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((g[j * 32 + k] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn semigroup_composes() {
        let v = ModeVector::new(vec![1.0, -0.5, 0.25, 2.0]);
        let ab = semigroup_apply(0.01, &semigroup_apply(0.02, &v));
        let direct = semigroup_apply(0.03, &v);
        for (x, y) in ab.coeffs().iter().zip(direct.coeffs()) {
            assert!((x - y).abs() <= 1e-14 * y.abs().max(1e-300));
        }
        assert_eq!(semigroup_apply(0.0, &v), v);
        let t = 0.05;
        assert!(semigroup_apply(t, &v).l2_norm() <= (-PI * PI * t).exp() * v.l2_norm());
    }

    #[test]
    fn inverse_laplacian_of_mode() {
        for n in 1..6 {
            let w = inverse_laplacian(&ModeVector::unit(6, n));
            assert_eq!(w.get(n), 1.0 / eigenvalue(n));
        }
    }

    #[test]
    fn kernel_quadratic_form() {
        let rule = GaussLegendre::new(64);
        // The kernel has a kink on the diagonal: split the inner integral there.
        let v = rule.integrate(0.0, 1.0, 2, |v| {
            let inner = rule.integrate(0.0, v, 1, |u| eigenfunction(1, u) * u * (1.0 - v))
                + rule.integrate(v, 1.0, 1, |u| eigenfunction(1, u) * v * (1.0 - u));
            inner * eigenfunction(1, v)
        });
        assert!((v - 1.0 / (PI * PI)).abs() < 1e-8);
        assert_eq!(green_kernel(0.0, 0.3), 0.0);
        assert_eq!(green_kernel(0.4, 1.0), 0.0);
        assert_eq!(green_kernel(0.2, 0.7), green_kernel(0.7, 0.2));
    }

    #[test]
    fn sobolev_norms() {
        let v = ModeVector::new(vec![0.3, -1.2, 0.7]);
        assert!((sobolev_norm(&v, 0.0, SobolevSign::Negative) - v.l2_norm()).abs() < 1e-15);
        let e1 = ModeVector::unit(3, 1);
        assert!((sobolev_norm(&e1, 2.5, SobolevSign::Negative) - PI.powf(-2.5)).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for k in [0.0, 0.5, 1.0, 2.0, 3.0] {
            let s = sobolev_norm(&v, k, SobolevSign::Negative);
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn projection_recovers_modes() {
        let b = SineBasis::new(8);
        let v = b.project(|u| 3.0 * eigenfunction(2, u) - eigenfunction(7, u));
        assert!((v.get(2) - 3.0).abs() < 1e-13);
        assert!((v.get(7) + 1.0).abs() < 1e-13);
        assert!(v.get(1).abs() < 1e-13);
        assert!((b.evaluate(&v, 0.3) - (3.0 * eigenfunction(2, 0.3) - eigenfunction(7, 0.3))).abs() < 1e-12);
    }
}
