//! Gauss–Legendre rules and adaptive Simpson integration.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `m`-point rule; nodes from Newton iteration on `P_m`.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1);
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]` split into `panels` equal pieces.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.len());
        let mut ws = Vec::with_capacity(panels * self.len());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(mid + 0.5 * h * x);
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }

    pub fn integrate(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let (xs, ws) = self.composite(a, b, panels);
        xs.iter().zip(&ws).map(|(&x, w)| w * f(x)).sum()
    }
}

// (P_m(x), P_m'(x)) by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Failure of [`adaptive_simpson`] to reach its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureFailure {
    pub achieved: f64,
    pub requested: f64,
}

const MAX_DEPTH: u32 = 40;
const MAX_EVALUATIONS: usize = 200_000;

/// Adaptive Simpson rule for a vector-valued integrand of fixed length.
///
/// The error control is on the largest component. On failure the best
/// available estimate of the error is reported.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<Vec<f64>, QuadratureFailure>
where
    F: Fn(f64) -> Vec<f64>,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, &fa, &fm, &fb);
    let mut worst = 0.0;
    let mut budget = MAX_EVALUATIONS;
    let out = recurse(&f, a, b, &fa, &fm, &fb, &whole, tol, MAX_DEPTH, &mut budget, &mut worst);
    if worst > 0.0 {
        return Err(QuadratureFailure { achieved: worst, requested: tol });
    }
    Ok(out)
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let h = (b - a) / 6.0;
    fa.iter().zip(fm).zip(fb).map(|((x, y), z)| h * (x + 4.0 * y + z)).collect()
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: u32,
    budget: &mut usize,
    worst: &mut f64,
) -> Vec<f64>
where
    F: Fn(f64) -> Vec<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    *budget = budget.saturating_sub(2);
    let left = simpson(a, m, fa, &flm, fm);
    let right = simpson(m, b, fm, &frm, fb);
    let err = left
        .iter()
        .zip(&right)
        .zip(whole)
        .fold(0.0f64, |e, ((l, r), w)| e.max((l + r - w).abs()));
    if err <= 15.0 * tol || depth == 0 || *budget == 0 {
        if err > 15.0 * tol {
            *worst += err / 15.0;
        }
        return left
            .iter()
            .zip(&right)
            .zip(whole)
            .map(|((l, r), w)| l + r + (l + r - w) / 15.0)
            .collect();
    }
    let mut out = recurse(f, a, m, fa, &flm, fm, &left, 0.5 * tol, depth - 1, budget, worst);
    let r = recurse(f, m, b, fm, &frm, fb, &right, 0.5 * tol, depth - 1, budget, worst);
    out.iter_mut().zip(r).for_each(|(o, v)| *o += v);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_polynomials_are_exact() {
        let g = GaussLegendre::new(64);
        assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        // exact up to degree 127
        let v = g.integrate(0.0, 1.0, 1, |x| x.powi(101));
        assert!((v - 1.0 / 102.0).abs() < 1e-14);
        let g5 = GaussLegendre::new(5);
        assert!((g5.integrate(-1.0, 1.0, 1, |x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let g = GaussLegendre::new(7);
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(g.nodes[3].abs() < 1e-15);
        assert!((g.nodes[0] + g.nodes[6]).abs() < 1e-15);
    }

    #[test]
    fn composite_rule_handles_oscillation() {
        let g = GaussLegendre::new(64);
        let v = g.integrate(0.0, 1.0, 4, |u| (40.0 * PI * u).sin().powi(2));
        assert!((v - 0.5).abs() < 1e-13);
    }

    #[test]
    fn simpson_vector_integrand() {
        let v = adaptive_simpson(|t| vec![t.exp(), (3.0 * t).cos()], 0.0, 1.0, 1e-12).unwrap();
        assert!((v[0] - (1f64.exp() - 1.0)).abs() < 1e-11);
        assert!((v[1] - 3f64.sin() / 3.0).abs() < 1e-11);
    }

    #[test]
    fn simpson_reports_failure() {
        let r = adaptive_simpson(|t| vec![(1.0 / (t + 1e-3)).sin()], 0.0, 1.0, 1e-300);
        assert!(r.is_err());
    }
}
