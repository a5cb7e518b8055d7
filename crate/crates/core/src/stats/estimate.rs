use super::{FieldSample, StatsError};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_mean(values: impl IntoIterator<Item = f64>) -> (f64, usize) {
    let mut s = CompensatedSum::default();
    let mut n = 0;
    for v in values {
        s.add(v);
        n += 1;
    }
    (s.value() / n.max(1) as f64, n)
}

/// Sample covariance of mode coordinates with per-entry standard errors.
///
/// The estimate is the unbiased `1 / (n - 1)` covariance. The standard error
/// of entry `(j, k)` is `sd(z) / sqrt(n)` with `z_i = (y_ij - m_j)(y_ik - m_k)`,
/// the delta-method error of a product moment.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    rows: usize,
    cols: usize,
    count: usize,
    cov: Vec<f64>,
    se: Vec<f64>,
}

impl CovarianceEstimate {
    /// Estimate assembled from externally computed entries (row-major).
    pub fn from_parts(rows: usize, cols: usize, count: usize, cov: Vec<f64>, se: Vec<f64>) -> Self {
        assert_eq!(cov.len(), rows * cols);
        assert_eq!(se.len(), rows * cols);
        Self { rows, cols, count, cov, se }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Entry for modes `j`, `k` (1-based).
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.cov[(j - 1) * self.cols + k - 1]
    }

    pub fn se(&self, j: usize, k: usize) -> f64 {
        self.se[(j - 1) * self.cols + k - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.cov
    }

    /// Entrywise comparison with `reference` (row-major, same shape) over
    /// `j <= rows_used`, `k <= cols_used`. An entry passes when its deviation
    /// is at most `max(sigmas * se, floor)`.
    pub fn compare(&self, reference: &[f64], rows_used: usize, cols_used: usize, sigmas: f64, floor: f64) -> Comparison {
        assert_eq!(reference.len(), self.rows * self.cols);
        let mut entries = Vec::new();
        for j in 1..=rows_used.min(self.rows) {
            for k in 1..=cols_used.min(self.cols) {
                let i = (j - 1) * self.cols + k - 1;
                let (est, se, analytic) = (self.cov[i], self.se[i], reference[i]);
                let dev = (est - analytic).abs();
                let z = if se > 0.0 { (est - analytic) / se } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
                let allowed = (sigmas * se).max(floor);
                entries.push(ComparisonEntry { j, k, estimate: est, se, analytic, z, pass: dev <= allowed });
            }
        }
        Comparison { entries }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonEntry {
    pub j: usize,
    pub k: usize,
    pub estimate: f64,
    pub se: f64,
    pub analytic: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub entries: Vec<ComparisonEntry>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.z.abs()))
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max((e.estimate - e.analytic).abs()))
    }
}

fn check_samples(a: &[FieldSample]) -> Result<usize, StatsError> {
    if a.len() < 2 {
        return Err(StatsError::TooFewSamples { got: a.len(), need: 2 });
    }
    let j = a[0].y.len();
    if j == 0 || a.iter().any(|s| s.y.len() != j) {
        return Err(StatsError::Degenerate("samples have inconsistent mode counts".into()));
    }
    if a.iter().any(|s| s.y.iter().any(|v| !v.is_finite())) {
        return Err(StatsError::Degenerate("non-finite sample".into()));
    }
    Ok(j)
}

/// Covariance of the mode coordinates within one set of samples.
pub fn estimate_covariance(samples: &[FieldSample]) -> Result<CovarianceEstimate, StatsError> {
    estimate_cross_covariance(samples, samples)
}

/// `Cov(a_j, b_k)` for paired samples (`a[i]` and `b[i]` from the same replica).
pub fn estimate_cross_covariance(a: &[FieldSample], b: &[FieldSample]) -> Result<CovarianceEstimate, StatsError> {
    let rows = check_samples(a)?;
    let cols = check_samples(b)?;
    if a.len() != b.len() {
        return Err(StatsError::Degenerate(format!("{} vs {} paired samples", a.len(), b.len())));
    }
    let n = a.len();
    let nf = n as f64;
    let ma: Vec<f64> = (0..rows).map(|j| compensated_mean(a.iter().map(|s| s.y[j])).0).collect();
    let mb: Vec<f64> = (0..cols).map(|k| compensated_mean(b.iter().map(|s| s.y[k])).0).collect();
    let mut cov = vec![0.0; rows * cols];
    let mut se = vec![0.0; rows * cols];
    for j in 0..rows {
        for k in 0..cols {
            let mut s1 = CompensatedSum::default();
            for (sa, sb) in a.iter().zip(b) {
                s1.add((sa.y[j] - ma[j]) * (sb.y[k] - mb[k]));
            }
            let mean_z = s1.value() / nf;
            let mut s2 = CompensatedSum::default();
            for (sa, sb) in a.iter().zip(b) {
                let z = (sa.y[j] - ma[j]) * (sb.y[k] - mb[k]) - mean_z;
                s2.add(z * z);
            }
            cov[j * cols + k] = s1.value() / (nf - 1.0);
            se[j * cols + k] = (s2.value() / (nf - 1.0)).sqrt() / nf.sqrt();
        }
    }
    Ok(CovarianceEstimate { rows, cols, count: n, cov, se })
}

/// Per-mode moment test against a Gaussian null.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMoments {
    pub j: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub z_skewness: f64,
    pub z_kurtosis: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianityReport {
    pub count: usize,
    pub threshold: f64,
    pub modes: Vec<ModeMoments>,
}

impl GaussianityReport {
    pub fn any_flagged(&self) -> bool {
        self.modes.iter().any(|m| m.flagged)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.modes
            .iter()
            .fold(0.0, |a, m| a.max(m.z_skewness.abs()).max(m.z_kurtosis.abs()))
    }
}

pub const GAUSSIANITY_MIN_SAMPLES: usize = 1000;
pub const GAUSSIANITY_THRESHOLD: f64 = 4.0;

/// Sample skewness `g1` and excess kurtosis `g2` of every mode, with z-scores
/// from their exact normal-theory mean and variance at sample size `n`:
/// `Var g1 = 6(n-2)/((n+1)(n+3))`, `E g2 = -6/(n+1)`,
/// `Var g2 = 24 n (n-2)(n-3)/((n+1)^2 (n+3)(n+5))`.
pub fn gaussianity_check(samples: &[FieldSample]) -> Result<GaussianityReport, StatsError> {
    let j_max = check_samples(samples)?;
    let n = samples.len();
    if n < GAUSSIANITY_MIN_SAMPLES {
        return Err(StatsError::TooFewSamples { got: n, need: GAUSSIANITY_MIN_SAMPLES });
    }
    let nf = n as f64;
    let var_g1 = 6.0 * (nf - 2.0) / ((nf + 1.0) * (nf + 3.0));
    let mean_g2 = -6.0 / (nf + 1.0);
    let var_g2 = 24.0 * nf * (nf - 2.0) * (nf - 3.0) / ((nf + 1.0).powi(2) * (nf + 3.0) * (nf + 5.0));
    let modes = (0..j_max)
        .map(|j| {
            let (m, _) = compensated_mean(samples.iter().map(|s| s.y[j]));
            let (mut m2, mut m3, mut m4) = (CompensatedSum::default(), CompensatedSum::default(), CompensatedSum::default());
            for s in samples {
                let d = s.y[j] - m;
                let d2 = d * d;
                m2.add(d2);
                m3.add(d2 * d);
                m4.add(d2 * d2);
            }
            let (m2, m3, m4) = (m2.value() / nf, m3.value() / nf, m4.value() / nf);
            let (skewness, excess_kurtosis) = if m2 > 0.0 {
                (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
            } else {
                (0.0, 0.0)
            };
            let z_skewness = skewness / var_g1.sqrt();
            let z_kurtosis = (excess_kurtosis - mean_g2) / var_g2.sqrt();
            let flagged = z_skewness.abs() > GAUSSIANITY_THRESHOLD || z_kurtosis.abs() > GAUSSIANITY_THRESHOLD;
            ModeMoments { j: j + 1, skewness, excess_kurtosis, z_skewness, z_kurtosis, flagged }
        })
        .collect();
    Ok(GaussianityReport { count: n, threshold: GAUSSIANITY_THRESHOLD, modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, StandardNormal};

    fn samples_from(rows: Vec<Vec<f64>>) -> Vec<FieldSample> {
        rows.into_iter().map(|y| FieldSample { time: 0.0, y }).collect()
    }

    #[test]
    fn constant_samples_have_zero_covariance() {
        let s = samples_from(vec![vec![1.0, -2.0]; 10]);
        let c = estimate_covariance(&s).unwrap();
        assert!(c.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_sample_definition() {
        let (y, yp) = (vec![1.0, 3.0], vec![2.0, -1.0]);
        let c = estimate_covariance(&samples_from(vec![y.clone(), yp.clone()])).unwrap();
        let m: Vec<f64> = y.iter().zip(&yp).map(|(a, b)| 0.5 * (a + b)).collect();
        for j in 0..2 {
            for k in 0..2 {
                let expect = (y[j] - m[j]) * (y[k] - m[k]) + (yp[j] - m[j]) * (yp[k] - m[k]);
                assert!((c.get(j + 1, k + 1) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(estimate_covariance(&samples_from(vec![vec![1.0]])).is_err());
        assert!(estimate_covariance(&samples_from(vec![vec![1.0], vec![f64::NAN]])).is_err());
        assert!(estimate_covariance(&samples_from(vec![vec![1.0], vec![1.0, 2.0]])).is_err());
    }

    #[test]
    fn synthetic_gaussian_within_error_bars() {
        // Sigma = L L^T with a fixed lower-triangular L.
        let l = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.5, 0.8, 0.0, -0.3, 0.2, 0.6]);
        let sigma = &l * l.transpose();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..20_000)
            .map(|_| {
                let z = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
                (&l * z).iter().copied().collect()
            })
            .collect();
        let c = estimate_covariance(&samples_from(rows)).unwrap();
        let reference: Vec<f64> = (0..3).flat_map(|j| (0..3).map(move |k| (j, k))).map(|(j, k)| sigma[(j, k)]).collect();
        let cmp = c.compare(&reference, 3, 3, 4.0, 0.0);
        assert!(cmp.passed(), "{:?}", cmp);
        assert!(c.se(1, 1) > 0.0);
    }

    #[test]
    fn gaussian_null_is_not_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = (0..10_000).map(|_| vec![StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]).collect();
        let r = gaussianity_check(&samples_from(rows)).unwrap();
        assert!(!r.any_flagged(), "{r:?}");
    }

    #[test]
    fn exponential_skew_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rows = (0..10_000).map(|_| vec![Exp1.sample(&mut rng)]).collect();
        let r = gaussianity_check(&samples_from(rows)).unwrap();
        assert!(r.modes[0].flagged);
        assert!((r.modes[0].skewness - 2.0).abs() < 0.5);
    }

    #[test]
    fn gaussianity_needs_enough_samples() {
        let rows = (0..100).map(|i| vec![i as f64]).collect();
        assert!(gaussianity_check(&samples_from(rows)).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
