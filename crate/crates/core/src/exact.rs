//! Brute-force ground truth for small chains.
//!
//! The generator is assembled as a dense matrix over all `2^(N-1)`
//! configurations and its stationary vector is found by a direct solve.
//! Configuration `eta` has index `sum_x eta(x) 2^(x-1)` (little-endian by
//! site), the same encoding as [`LatticeConfig::to_bits`].

use std::io::Write;

use thiserror::Error;

use crate::pde::{Profile1D, TriangleField};
use crate::process::{BoundaryParams, LatticeConfig};

/// Largest chain handled exactly (8192 states, about 0.5 GB per matrix).
pub const N_MAX: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("N = {n} exceeds the exact-solver cap {max}")]
    Capacity { n: usize, max: usize },
    #[error("N must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("generator is numerically singular (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("stationary residual {residual:e} exceeds {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("distribution has {got} entries, expected {expected}")]
    Shape { got: usize, expected: usize },
}

/// Rate matrix of the chain, row-major.
#[derive(Debug, Clone)]
pub struct DenseGenerator {
    n: usize,
    bp: BoundaryParams,
    q: Vec<f64>,
}

impl DenseGenerator {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.bp
    }

    /// Number of states, `2^(N-1)`.
    pub fn dim(&self) -> usize {
        1 << (self.n - 1)
    }

    /// Rate from state `from` to state `to` (the diagonal holds minus the
    /// total out-rate).
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.q[from * self.dim() + to]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        let d = self.dim();
        &self.q[state * d..(state + 1) * d]
    }

    /// `(Q f)(eta) = sum_eta' q(eta, eta') f(eta')`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.dim());
        (0..self.dim())
            .map(|s| self.row(s).iter().zip(f).map(|(q, v)| q * v).sum())
            .collect()
    }

    /// `(nu Q)(eta') = sum_eta nu(eta) q(eta, eta')`.
    pub fn apply_left(&self, nu: &[f64]) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(nu.len(), d);
        let mut out = vec![0.0; d];
        for (s, &p) in nu.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, q) in out.iter_mut().zip(self.row(s)) {
                *o += p * q;
            }
        }
        out
    }

    /// Largest absolute row sum; zero up to rounding for a valid generator.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim())
            .map(|s| self.row(s).iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

/// Dense generator for a chain of size `n`.
pub fn build_generator_dense(n: usize, bp: &BoundaryParams) -> Result<DenseGenerator, ExactError> {
    if n < 2 {
        return Err(ExactError::TooSmall(n));
    }
    if n > N_MAX {
        return Err(ExactError::Capacity { n, max: N_MAX });
    }
    let sites = n - 1;
    let dim = 1usize << sites;
    let mut q = vec![0.0; dim * dim];
    let last = 1usize << (sites - 1);
    for s in 0..dim {
        let row = &mut q[s * dim..(s + 1) * dim];
        let mut out = 0.0;
        for b in 0..sites - 1 {
            let pair = 3usize << b;
            let bits = s & pair;
            if bits != 0 && bits != pair {
                row[s ^ pair] += 1.0;
                out += 1.0;
            }
        }
        let left = bp.left_rate(s & 1 != 0);
        row[s ^ 1] += left;
        let right = bp.right_rate(s & last != 0);
        row[s ^ last] += right;
        out += left + right;
        row[s] -= out;
    }
    Ok(DenseGenerator { n, bp: *bp, q })
}

/// Stationary law over configurations.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    n: usize,
    bp: BoundaryParams,
    probs: Vec<f64>,
    residual: f64,
}

impl StationaryDistribution {
    /// Wraps a probability vector; the residual is left unknown (NaN).
    pub fn from_probs(n: usize, bp: BoundaryParams, probs: Vec<f64>) -> Result<Self, ExactError> {
        let expected = 1usize << (n - 1);
        if probs.len() != expected {
            return Err(ExactError::Shape { got: probs.len(), expected });
        }
        Ok(Self { n, bp, probs, residual: f64::NAN })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.bp
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, config: &LatticeConfig) -> f64 {
        self.probs[config.to_bits() as usize]
    }

    /// `max |nu Q|` at the computed solution.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Writes `state_bits,probability` rows; `state_bits` lists
    /// `eta(1) eta(2) ... eta(N-1)` left to right.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state_bits", "probability"])?;
        for (s, p) in self.probs.iter().enumerate() {
            let bits: String = (0..self.n - 1).map(|i| if s >> i & 1 == 1 { '1' } else { '0' }).collect();
            w.write_record([bits, format!("{p:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Left null vector of `Q`, normalized to a probability vector.
///
/// Solves `Q^T nu = 0` with the last equation replaced by `sum nu = 1`. The
/// system is nonsingular whenever the stationary law is unique, which holds
/// for every `(alpha, beta)` in the closed unit square.
pub fn stationary_distribution(g: &DenseGenerator) -> Result<StationaryDistribution, ExactError> {
    let d = g.dim();
    let mut a = vec![0.0; d * d];
    for s in 0..d {
        for (t, &q) in g.row(s).iter().enumerate() {
            a[t * d + s] = q;
        }
    }
    a[(d - 1) * d..].fill(1.0);
    let mut rhs = vec![0.0; d];
    rhs[d - 1] = 1.0;
    let lu = DenseLu::factor(a, d)?;
    let mut probs = lu.solve(&rhs);
    // Rounding can leave entries of size ~1e-17 below zero.
    for p in probs.iter_mut() {
        if *p < 0.0 && *p > -1e-13 {
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let residual = g.apply_left(&probs).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual > RESIDUAL_TOLERANCE {
        return Err(ExactError::Residual { residual, tolerance: RESIDUAL_TOLERANCE });
    }
    Ok(StationaryDistribution { n: g.n, bp: g.bp, probs, residual })
}

/// `E[eta(x)]` for `x = 1..N-1`, extended by `alpha` and `beta`.
pub fn exact_profile(sd: &StationaryDistribution) -> Profile1D {
    let sites = sd.n - 1;
    let mut interior = vec![0.0; sites];
    for (s, &p) in sd.probs.iter().enumerate() {
        for (x, v) in interior.iter_mut().enumerate() {
            if s >> x & 1 == 1 {
                *v += p;
            }
        }
    }
    Profile1D::from_interior(sd.n, &sd.bp, &interior).expect("stationary profile is finite")
}

/// `E[eta(x) eta(y)] - E[eta(x)] E[eta(y)]` for `1 <= x < y <= N-1`.
pub fn exact_two_point(sd: &StationaryDistribution) -> TriangleField {
    let n = sd.n;
    let rho = exact_profile(sd);
    let mut joint = TriangleField::zeros(n);
    for (s, &p) in sd.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for x in 1..n {
            if s >> (x - 1) & 1 == 0 {
                continue;
            }
            for y in x + 1..n {
                if s >> (y - 1) & 1 == 1 {
                    joint.set(x, y, joint.get(x, y) + p);
                }
            }
        }
    }
    TriangleField::from_fn(n, |x, y| joint.get(x, y) - rho.value(x) * rho.value(y))
}

/// `(beta - alpha)^2 / (N - 1) (x/N) (1 - y/N)`, the magnitude of the
/// stationary two-point function.
pub fn two_point_magnitude(n: usize, bp: &BoundaryParams) -> TriangleField {
    let d2 = (bp.beta() - bp.alpha()).powi(2);
    let nf = n as f64;
    TriangleField::from_fn(n, |x, y| d2 / (nf - 1.0) * (x as f64 / nf) * (1.0 - y as f64 / nf))
}

/// Best global sign relating a two-point function to [`two_point_magnitude`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignFit {
    /// `+1` or `-1`; `None` when the magnitude vanishes (`alpha == beta`).
    pub sigma: Option<f64>,
    /// `max |two_point - sigma * magnitude|` (with `sigma = 0` if undetermined).
    pub max_error: f64,
}

pub fn fit_sign(two_point: &TriangleField, bp: &BoundaryParams) -> SignFit {
    let m = two_point_magnitude(two_point.size(), bp);
    let dot: f64 = two_point.values().iter().zip(m.values()).map(|(a, b)| a * b).sum();
    let norm = m.values().iter().map(|b| b * b).sum::<f64>();
    let sigma = if norm > 0.0 && dot != 0.0 { Some(dot.signum()) } else { None };
    let s = sigma.unwrap_or(0.0);
    let max_error = two_point
        .values()
        .iter()
        .zip(m.values())
        .fold(0.0, |e: f64, (a, b)| e.max((a - s * b).abs()));
    SignFit { sigma, max_error }
}

/// `max |nu(s) q(s, s') - nu(s') q(s', s)|`; zero for a reversible law.
pub fn reversibility_defect(g: &DenseGenerator, sd: &StationaryDistribution) -> f64 {
    let d = g.dim();
    let mut worst: f64 = 0.0;
    for s in 0..d {
        for t in s + 1..d {
            let flux = sd.probs[s] * g.rate(s, t) - sd.probs[t] * g.rate(t, s);
            worst = worst.max(flux.abs());
        }
    }
    worst
}

/// LU factorization with partial pivoting, `P A = L U`, row-major.
///
/// Right-looking and blocked: each panel of `BLOCK` columns is factored
/// unblocked, and the trailing matrix is updated with one matrix product.
struct DenseLu {
    d: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

const BLOCK: usize = 64;

impl DenseLu {
    fn factor(mut a: Vec<f64>, d: usize) -> Result<Self, ExactError> {
        assert_eq!(a.len(), d * d);
        let mut perm: Vec<usize> = (0..d).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * d as f64 * f64::EPSILON * 1e-3;
        let mut k0 = 0;
        while k0 < d {
            let kb = BLOCK.min(d - k0);
            let k1 = k0 + kb;
            for j in k0..k1 {
                let (mut p, mut best) = (j, a[j * d + j].abs());
                for i in j + 1..d {
                    let v = a[i * d + j].abs();
                    if v > best {
                        best = v;
                        p = i;
                    }
                }
                if !(best > tiny) {
                    return Err(ExactError::Singular { column: j, pivot: best });
                }
                if p != j {
                    for c in 0..d {
                        a.swap(j * d + c, p * d + c);
                    }
                    perm.swap(j, p);
                }
                let pivot = a[j * d + j];
                let (top, rest) = a.split_at_mut((j + 1) * d);
                let prow = &top[j * d + j + 1..j * d + k1];
                for row in rest.chunks_exact_mut(d) {
                    let l = row[j] / pivot;
                    row[j] = l;
                    if l != 0.0 {
                        for (r, u) in row[j + 1..k1].iter_mut().zip(prow) {
                            *r -= l * u;
                        }
                    }
                }
            }
            if k1 < d {
                // U12 = L11^{-1} A12
                for j in k0..k1 {
                    let (top, rest) = a.split_at_mut((j + 1) * d);
                    let urow = &top[j * d + k1..j * d + d];
                    for row in rest.chunks_exact_mut(d).take(k1 - j - 1) {
                        let l = row[j];
                        if l != 0.0 {
                            for (r, u) in row[k1..].iter_mut().zip(urow) {
                                *r -= l * u;
                            }
                        }
                    }
                }
                // A22 -= L21 U12
                let m = d - k1;
                let ptr = a.as_mut_ptr();
                // SAFETY: the three blocks are disjoint sub-rectangles of `a`
                // (rows k1.. x cols k0..k1, rows k0..k1 x cols k1.., and rows
                // k1.. x cols k1..), all within bounds for row stride d.
                unsafe {
                    matrixmultiply::dgemm(
                        m,
                        kb,
                        m,
                        -1.0,
                        ptr.add(k1 * d + k0),
                        d as isize,
                        1,
                        ptr.add(k0 * d + k1),
                        d as isize,
                        1,
                        1.0,
                        ptr.add(k1 * d + k1),
                        d as isize,
                        1,
                    );
                }
            }
            k0 = k1;
        }
        Ok(Self { d, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..d {
            let row = &self.lu[i * d..i * d + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..d).rev() {
            let row = &self.lu[i * d..(i + 1) * d];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bp(a: f64, b: f64) -> BoundaryParams {
        BoundaryParams::new(a, b).unwrap()
    }

    #[test]
    fn single_site_generator() {
        let (a, b) = (0.3, 0.6);
        let g = build_generator_dense(2, &bp(a, b)).unwrap();
        assert_eq!(g.dim(), 2);
        let expect = [[-(a + b), a + b], [2.0 - a - b, -(2.0 - a - b)]];
        for s in 0..2 {
            for t in 0..2 {
                assert!((g.rate(s, t) - expect[s][t]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn out_rate_bookkeeping() {
        let (a, b) = (0.2, 0.7);
        let g = build_generator_dense(3, &bp(a, b)).unwrap();
        let s = LatticeConfig::new(3, vec![1, 0]).unwrap().to_bits() as usize;
        assert!((-g.rate(s, s) - (1.0 + (1.0 - a) + b)).abs() < 1e-15);
        assert!(g.max_row_sum() < 1e-12);
    }

    #[test]
    fn capacity_is_enforced() {
        assert_eq!(
            build_generator_dense(15, &bp(0.5, 0.5)).unwrap_err(),
            ExactError::Capacity { n: 15, max: 14 }
        );
        assert!(build_generator_dense(1, &bp(0.5, 0.5)).is_err());
    }

    #[test]
    fn generator_matches_hand_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 6;
        let b = bp(0.15, 0.8);
        let g = build_generator_dense(n, &b).unwrap();
        let f: Vec<f64> = (0..g.dim()).map(|_| rng.random::<f64>()).collect();
        let qf = g.apply(&f);
        for s in 0..g.dim() {
            let eta = LatticeConfig::from_bits(n, s as u64);
            let at = |c: &LatticeConfig| f[c.to_bits() as usize];
            let mut sum = 0.0;
            for x in 1..n - 1 {
                let mut c = eta.clone();
                c.swap_bond(x);
                sum += at(&c) - at(&eta);
            }
            let mut c = eta.clone();
            c.flip(1);
            let e1 = eta.get(1) as f64;
            sum += (b.alpha() * (1.0 - e1) + (1.0 - b.alpha()) * e1) * (at(&c) - at(&eta));
            let mut c = eta.clone();
            c.flip(n - 1);
            let en = eta.get(n - 1) as f64;
            sum += (b.beta() * (1.0 - en) + (1.0 - b.beta()) * en) * (at(&c) - at(&eta));
            assert!((qf[s] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn single_site_balance() {
        for (a, b) in [(0.3, 0.6), (0.0, 1.0), (1.0, 1.0), (0.0, 0.0)] {
            let g = build_generator_dense(2, &bp(a, b)).unwrap();
            let sd = stationary_distribution(&g).unwrap();
            assert!((sd.probs()[1] - (a + b) / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_reservoirs_give_product_measure() {
        for n in 2..=8 {
            let gamma = 0.35;
            let g = build_generator_dense(n, &bp(gamma, gamma)).unwrap();
            let sd = stationary_distribution(&g).unwrap();
            for (s, &p) in sd.probs().iter().enumerate() {
                let k = (s as u64).count_ones() as i32;
                let expect = gamma.powi(k) * (1.0 - gamma).powi(n as i32 - 1 - k);
                assert!((p - expect).abs() < 1e-12);
            }
            assert!(reversibility_defect(&g, &sd) < 1e-12);
            assert!(exact_two_point(&sd).sup_norm() < 1e-12);
        }
    }

    #[test]
    fn three_site_sign_check() {
        let b = bp(0.0, 1.0);
        let g = build_generator_dense(3, &b).unwrap();
        let sd = stationary_distribution(&g).unwrap();
        assert!(sd.residual() <= 1e-12);
        assert!((exact_two_point(&sd).get(1, 2) + 1.0 / 18.0).abs() < 1e-12);
        let fit = fit_sign(&exact_two_point(&sd), &b);
        assert_eq!(fit.sigma, Some(-1.0));
        assert!(fit.max_error < 1e-12);
        let rho = exact_profile(&sd);
        assert!((rho.value(1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((rho.value(2) - 2.0 / 3.0).abs() < 1e-12);
        assert!(reversibility_defect(&g, &sd) > 1e-3);
    }

    #[test]
    fn blocked_lu_matches_reference_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 150;
        let m = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
        let b = DVector::<f64>::from_fn(d, |_, _| rng.random::<f64>());
        let reference = m.clone().lu().solve(&b).unwrap();
        let row_major: Vec<f64> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
        let x = DenseLu::factor(row_major, d).unwrap().solve(b.as_slice());
        for i in 0..d {
            assert!((x[i] - reference[i]).abs() < 1e-9 * (1.0 + reference[i].abs()));
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(DenseLu::factor(a, 2), Err(ExactError::Singular { .. })));
    }

    #[test]
    fn csv_dump_layout() {
        let g = build_generator_dense(3, &bp(0.5, 0.5)).unwrap();
        let sd = stationary_distribution(&g).unwrap();
        let mut buf = Vec::new();
        sd.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "state_bits,probability");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("10,"));
        assert!(lines[3].starts_with("01,"));
    }
}
