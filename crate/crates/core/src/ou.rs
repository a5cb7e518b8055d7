//! Galerkin truncation of the limiting Ornstein–Uhlenbeck equation.
//!
//! On the first `J` sine modes the equation becomes the linear SDE
//! `dY_j = -lambda_j Y_j dt + dW_j` with `Cov(dW) = B(t) dt` and
//! `B_jk(t) = 2 int chi(rho(t, u)) e_j'(u) e_k'(u) du`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::rng::keyed_stream;
use crate::spectral::{eigenvalue, gradient_weight_matrix, stationary_gradient_weight, ContinuumProfile};
use crate::stats::{CompensatedSum, CovarianceEstimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OuError {
    #[error("noise covariance has eigenvalue {min_eigenvalue:e} below -{tolerance:e}")]
    NotPositive { min_eigenvalue: f64, tolerance: f64 },
    #[error("invalid OU run: {0}")]
    InvalidSpec(String),
}

/// Tolerance on negative eigenvalues of `B`.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// `J x J` noise covariance, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    j_max: usize,
    b: Vec<f64>,
}

impl NoiseCovariance {
    pub fn from_matrix(j_max: usize, b: Vec<f64>) -> Self {
        assert_eq!(b.len(), j_max * j_max);
        Self { j_max, b }
    }

    pub fn modes(&self) -> usize {
        self.j_max
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.b[(j - 1) * self.j_max + k - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.b
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.j_max, self.j_max, &self.b)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix()).eigenvalues.min()
    }

    pub fn check_psd(&self) -> Result<(), OuError> {
        let m = self.min_eigenvalue();
        if m < -PSD_TOLERANCE {
            return Err(OuError::NotPositive { min_eigenvalue: m, tolerance: PSD_TOLERANCE });
        }
        Ok(())
    }

    /// Symmetric square root through the eigendecomposition, with eigenvalues
    /// in `[-tol, 0)` clamped to zero.
    pub fn sqrt(&self) -> Result<Vec<f64>, OuError> {
        symmetric_sqrt(self.j_max, &self.b)
    }
}

fn symmetric_sqrt(j: usize, m: &[f64]) -> Result<Vec<f64>, OuError> {
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(j, j, m));
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE {
        return Err(OuError::NotPositive { min_eigenvalue: min, tolerance: PSD_TOLERANCE });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let s = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    Ok((0..j).flat_map(|a| (0..j).map(move |b| (a, b))).map(|(a, b)| s[(a, b)]).collect())
}

/// `B(t)` for the heat flow described by `profile`, by quadrature.
pub fn noise_covariance(j_max: usize, profile: &ContinuumProfile, t: f64) -> Result<NoiseCovariance, OuError> {
    if !(t >= 0.0) {
        return Err(OuError::InvalidSpec(format!("time must be >= 0, got {t}")));
    }
    let b = gradient_weight_matrix(j_max, profile, t).into_iter().map(|v| 2.0 * v).collect();
    Ok(NoiseCovariance { j_max, b })
}

/// `B` for the linear stationary profile, in closed form.
pub fn stationary_noise_covariance(j_max: usize, bp: &crate::process::BoundaryParams) -> NoiseCovariance {
    let mut b = vec![0.0; j_max * j_max];
    for j in 1..=j_max {
        for k in j..=j_max {
            let v = 2.0 * stationary_gradient_weight(j, k, bp);
            b[(j - 1) * j_max + k - 1] = v;
            b[(k - 1) * j_max + j - 1] = v;
        }
    }
    NoiseCovariance { j_max, b }
}

/// Solution of `Lambda S + S Lambda = B`: `S_jk = B_jk / (lambda_j + lambda_k)`.
pub fn lyapunov_stationary(b: &NoiseCovariance) -> Vec<f64> {
    let j = b.j_max;
    let mut s = vec![0.0; j * j];
    for a in 1..=j {
        for c in 1..=j {
            s[(a - 1) * j + c - 1] = b.get(a, c) / (eigenvalue(a) + eigenvalue(c));
        }
    }
    s
}

/// `max |Lambda S + S Lambda - B|`.
pub fn lyapunov_residual(s: &[f64], b: &NoiseCovariance) -> f64 {
    let j = b.j_max;
    let mut worst: f64 = 0.0;
    for a in 1..=j {
        for c in 1..=j {
            let r = (eigenvalue(a) + eigenvalue(c)) * s[(a - 1) * j + c - 1] - b.get(a, c);
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Stationary covariance of the Euler–Maruyama chain with step `dt`:
/// `B_jk / (lambda_j + lambda_k - dt lambda_j lambda_k)`.
pub fn euler_maruyama_stationary(b: &NoiseCovariance, dt: f64) -> Vec<f64> {
    let j = b.j_max;
    let mut s = vec![0.0; j * j];
    for a in 1..=j {
        for c in 1..=j {
            let (la, lc) = (eigenvalue(a), eigenvalue(c));
            s[(a - 1) * j + c - 1] = b.get(a, c) / (la + lc - dt * la * lc);
        }
    }
    s
}

/// Largest step keeping `lambda_J dt <= 0.1`.
pub fn max_stable_dt(j_max: usize) -> f64 {
    0.1 / eigenvalue(j_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stepper {
    #[default]
    EulerMaruyama,
    /// Exact transition of the linear SDE for a time-independent `B`.
    Exact,
}

/// Where the density path comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    /// Fixed `B` (stationary profile).
    Fixed(NoiseCovariance),
    /// `B(t)` from a heat flow, re-evaluated every `refresh` steps.
    Profile { profile: ContinuumProfile, refresh: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuSpec {
    pub modes: usize,
    /// Requested step; shrunk to [`max_stable_dt`] if larger.
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub noise: NoiseSource,
    pub stepper: Stepper,
    /// `None` starts from the zero field.
    pub initial: Option<Vec<f64>>,
    /// Record every this many steps.
    pub record_every: usize,
}

impl OuSpec {
    pub fn effective_dt(&self) -> f64 {
        self.dt.min(max_stable_dt(self.modes))
    }

    fn validate(&self) -> Result<(), OuError> {
        let bad = |m: String| Err(OuError::InvalidSpec(m));
        if self.modes == 0 {
            return bad("need at least one mode".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("end time must be finite and >= 0, got {}", self.t_end));
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if let Some(y) = &self.initial {
            if y.len() != self.modes {
                return bad(format!("initial state has {} modes, expected {}", y.len(), self.modes));
            }
        }
        match &self.noise {
            NoiseSource::Fixed(b) if b.modes() != self.modes => bad("noise covariance size mismatch".into()),
            NoiseSource::Profile { refresh: 0, .. } => bad("refresh must be >= 1".into()),
            NoiseSource::Profile { .. } if self.stepper == Stepper::Exact => {
                bad("the exact stepper needs a time-independent noise covariance".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub time: f64,
    pub y: Vec<f64>,
}

// Linear map and noise factor for one step.
struct Step {
    j: usize,
    decay: Vec<f64>,
    noise: Vec<f64>,
}

impl Step {
    fn euler(b: &NoiseCovariance, dt: f64) -> Result<Self, OuError> {
        let j = b.modes();
        let decay = (1..=j).map(|n| 1.0 - eigenvalue(n) * dt).collect();
        let scaled: Vec<f64> = b.values().iter().map(|v| v * dt).collect();
        Ok(Self { j, decay, noise: symmetric_sqrt(j, &scaled)? })
    }

    fn exact(b: &NoiseCovariance, dt: f64) -> Result<Self, OuError> {
        let j = b.modes();
        let decay = (1..=j).map(|n| (-eigenvalue(n) * dt).exp()).collect();
        let mut cov = vec![0.0; j * j];
        for a in 1..=j {
            for c in 1..=j {
                let l = eigenvalue(a) + eigenvalue(c);
                cov[(a - 1) * j + c - 1] = b.get(a, c) * -(-l * dt).exp_m1() / l;
            }
        }
        Ok(Self { j, decay, noise: symmetric_sqrt(j, &cov)? })
    }

    fn apply<R: Rng + ?Sized>(&self, y: &mut [f64], xi: &mut [f64], rng: &mut R) {
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (a, v) in y.iter_mut().enumerate() {
            let row = &self.noise[a * self.j..(a + 1) * self.j];
            *v = self.decay[a] * *v + row.iter().zip(xi.iter()).map(|(s, x)| s * x).sum::<f64>();
        }
    }
}

fn step_for(spec: &OuSpec, b: &NoiseCovariance, dt: f64) -> Result<Step, OuError> {
    match spec.stepper {
        Stepper::EulerMaruyama => Step::euler(b, dt),
        Stepper::Exact => Step::exact(b, dt),
    }
}

/// Step matrices for every refresh window, shared by all replicas.
fn schedule(spec: &OuSpec, dt: f64, steps: usize) -> Result<(Vec<Step>, usize), OuError> {
    match &spec.noise {
        NoiseSource::Fixed(b) => {
            b.check_psd()?;
            Ok((vec![step_for(spec, b, dt)?], steps.max(1)))
        }
        NoiseSource::Profile { profile, refresh } => {
            let windows = steps.div_ceil(*refresh).max(1);
            let plan = (0..windows)
                .map(|w| {
                    // B at the midpoint of the window.
                    let first = w * refresh;
                    let len = (*refresh).min(steps.saturating_sub(first)).max(1);
                    let b = noise_covariance(spec.modes, profile, (first as f64 + 0.5 * len as f64) * dt)?;
                    b.check_psd()?;
                    step_for(spec, &b, dt)
                })
                .collect::<Result<_, _>>()?;
            Ok((plan, *refresh))
        }
    }
}

fn run_path(spec: &OuSpec, plan: &[Step], window: usize, dt: f64, steps: usize, replica: u64) -> Vec<ModeState> {
    let mut rng = keyed_stream(spec.seed, 0, replica);
    let mut y = spec.initial.clone().unwrap_or_else(|| vec![0.0; spec.modes]);
    let mut xi = vec![0.0; spec.modes];
    let mut out = vec![ModeState { time: 0.0, y: y.clone() }];
    for i in 0..steps {
        plan[(i / window).min(plan.len() - 1)].apply(&mut y, &mut xi, &mut rng);
        if (i + 1) % spec.record_every == 0 || i + 1 == steps {
            out.push(ModeState { time: (i + 1) as f64 * dt, y: y.clone() });
        }
    }
    out
}

/// Simulates one trajectory and returns the recorded states.
pub fn simulate_ou(spec: &OuSpec) -> Result<Vec<ModeState>, OuError> {
    Ok(simulate_ou_ensemble(spec, 1)?.pop().expect("one replica"))
}

/// Independent trajectories; replica `r` uses the stream `(seed, r)` and
/// replica 0 is the path returned by [`simulate_ou`].
pub fn simulate_ou_ensemble(spec: &OuSpec, replicas: usize) -> Result<Vec<Vec<ModeState>>, OuError> {
    spec.validate()?;
    let dt = spec.effective_dt();
    let steps = (spec.t_end / dt).round() as usize;
    let (plan, window) = schedule(spec, dt, steps)?;
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| run_path(spec, &plan, window, dt, steps, r as u64))
        .collect())
}

/// Long stationary run with streaming batch-means covariance.
///
/// After `burn_in` time units the run is cut into `batches` equal batches;
/// each batch yields second moments about zero (the stationary mean), and
/// the reported standard error is the spread of the batch estimates over
/// `sqrt(batches)`. Nothing per step is stored.
pub fn ou_long_run_covariance(
    b: &NoiseCovariance,
    dt: f64,
    t_end: f64,
    burn_in: f64,
    batches: usize,
    seed: u64,
    stepper: Stepper,
) -> Result<CovarianceEstimate, OuError> {
    if batches < 2 {
        return Err(OuError::InvalidSpec("need at least two batches".into()));
    }
    b.check_psd()?;
    let j = b.modes();
    let dt = dt.min(max_stable_dt(j));
    let step = match stepper {
        Stepper::EulerMaruyama => Step::euler(b, dt)?,
        Stepper::Exact => Step::exact(b, dt)?,
    };
    let mut rng = keyed_stream(seed, 0, 0);
    let mut y = vec![0.0; j];
    let mut xi = vec![0.0; j];
    for _ in 0..(burn_in / dt).round() as usize {
        step.apply(&mut y, &mut xi, &mut rng);
    }
    let per_batch = ((t_end / dt).round() as usize / batches).max(1);
    let mut batch_cov: Vec<Vec<f64>> = Vec::with_capacity(batches);
    for _ in 0..batches {
        let mut acc: Vec<CompensatedSum> = vec![CompensatedSum::default(); j * j];
        for _ in 0..per_batch {
            step.apply(&mut y, &mut xi, &mut rng);
            for a in 0..j {
                for c in a..j {
                    acc[a * j + c].add(y[a] * y[c]);
                }
            }
        }
        let mut m = vec![0.0; j * j];
        for a in 0..j {
            for c in a..j {
                let v = acc[a * j + c].value() / per_batch as f64;
                m[a * j + c] = v;
                m[c * j + a] = v;
            }
        }
        batch_cov.push(m);
    }
    let nb = batches as f64;
    let mut cov = vec![0.0; j * j];
    let mut se = vec![0.0; j * j];
    for i in 0..j * j {
        let mean = batch_cov.iter().map(|m| m[i]).sum::<f64>() / nb;
        let var = batch_cov.iter().map(|m| (m[i] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        cov[i] = mean;
        se[i] = (var / nb).sqrt();
    }
    Ok(CovarianceEstimate::from_parts(j, j, per_batch * batches, cov, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::BoundaryParams;
    use crate::spectral::stationary_covariance;

    fn bp(a: f64, b: f64) -> BoundaryParams {
        BoundaryParams::new(a, b).unwrap()
    }

    #[test]
    fn equilibrium_noise_is_diagonal() {
        let g = 0.3;
        let b = stationary_noise_covariance(5, &bp(g, g));
        for j in 1..=5 {
            for k in 1..=5 {
                let expect = if j == k { 2.0 * g * (1.0 - g) * eigenvalue(j) } else { 0.0 };
                assert!((b.get(j, k) - expect).abs() < 1e-10 * (1.0 + expect));
            }
        }
        let s = lyapunov_stationary(&b);
        for j in 0..5 {
            assert!((s[j * 5 + j] - g * (1.0 - g)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_matches_closed_form_and_is_symmetric() {
        let p = bp(0.0, 1.0);
        let quad = noise_covariance(6, &ContinuumProfile::stationary(&p), 0.0).unwrap();
        let closed = stationary_noise_covariance(6, &p);
        for j in 1..=6 {
            for k in 1..=6 {
                assert!((quad.get(j, k) - closed.get(j, k)).abs() < 1e-10);
                assert_eq!(quad.get(j, k), quad.get(k, j));
            }
        }
        assert!(quad.min_eigenvalue() > -PSD_TOLERANCE);
    }

    #[test]
    fn lyapunov_recovers_stationary_covariance() {
        let p = bp(0.0, 1.0);
        let b = stationary_noise_covariance(16, &p);
        let s = lyapunov_stationary(&b);
        assert!(lyapunov_residual(&s, &b) <= 1e-12);
        for j in 1..=16 {
            for k in 1..=16 {
                assert!((s[(j - 1) * 16 + k - 1] - stationary_covariance(j, k, &p)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_noise_decays() {
        let spec = OuSpec {
            modes: 2,
            dt: 1e-4,
            t_end: 0.05,
            seed: 1,
            noise: NoiseSource::Fixed(NoiseCovariance::from_matrix(2, vec![0.0; 4])),
            stepper: Stepper::EulerMaruyama,
            initial: Some(vec![1.0, -2.0]),
            record_every: 100,
        };
        let path = simulate_ou(&spec).unwrap();
        let last = path.last().unwrap();
        for (j, y0) in [(1, 1.0), (2, -2.0)] {
            let exact = y0 * (-eigenvalue(j) * last.time).exp();
            assert!((last.y[j - 1] - exact).abs() < 0.05 * exact.abs());
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let spec = OuSpec {
            modes: 3,
            dt: 1e-3,
            t_end: 0.1,
            seed: 77,
            noise: NoiseSource::Fixed(stationary_noise_covariance(3, &bp(0.1, 0.9))),
            stepper: Stepper::EulerMaruyama,
            initial: None,
            record_every: 10,
        };
        assert_eq!(simulate_ou(&spec).unwrap(), simulate_ou(&spec).unwrap());
    }

    #[test]
    fn non_psd_noise_is_rejected() {
        let b = NoiseCovariance::from_matrix(2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(b.check_psd(), Err(OuError::NotPositive { .. })));
        assert!(b.sqrt().is_err());
    }

    #[test]
    fn square_root_squares_back() {
        let b = stationary_noise_covariance(4, &bp(0.2, 0.8));
        let r = b.sqrt().unwrap();
        for a in 0..4 {
            for c in 0..4 {
                let v: f64 = (0..4).map(|k| r[a * 4 + k] * r[k * 4 + c]).sum();
                assert!((v - b.values()[a * 4 + c]).abs() < 1e-9 * b.values()[0]);
            }
        }
    }

    #[test]
    fn exact_stepper_is_unbiased() {
        let b = stationary_noise_covariance(2, &bp(0.1, 0.9));
        let est = ou_long_run_covariance(&b, 0.01, 400.0, 1.0, 50, 3, Stepper::Exact).unwrap();
        let s = lyapunov_stationary(&b);
        let cmp = est.compare(&s, 2, 2, 4.0, 0.0);
        assert!(cmp.passed(), "{cmp:?}");
    }
}
