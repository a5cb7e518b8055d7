use rayon::prelude::*;

use super::estimate::CompensatedSum;
use super::{FieldSample, ModeProjector, StatsError};
use crate::pde::{HeatFlow, Profile1D};
use crate::process::{sample_product, BoundaryParams, Dynamics, LatticeConfig, Simulator, UniformizedSimulator};
use crate::rng::replica_stream;

/// Path sampler used by the ensemble drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    /// Incremental-rate-table Gillespie ([`Simulator`]).
    Gillespie,
    /// Constant-rate thinning ([`UniformizedSimulator`]).
    #[default]
    Uniformized,
}

/// How replicas start.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Product measure of the linear profile, then `burn_in` units of
    /// diffusive time; observation times are counted after the burn-in and
    /// fields are centred at the linear profile.
    StationaryBurnIn,
    /// Product measure with the given site densities; fields at time `t` are
    /// centred at the semidiscrete heat flow of that profile.
    Product(Profile1D),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub n: usize,
    pub bp: BoundaryParams,
    pub initial: InitialCondition,
    pub replicas: usize,
    pub times: Vec<f64>,
    pub burn_in: f64,
    pub seed: u64,
    pub modes: usize,
    pub sampler: Sampler,
    /// Keep every replica's configuration at every observation time.
    pub keep_configs: bool,
}

/// Default burn-in, about ten relaxation times `1 / pi^2` of the slowest mode.
pub const DEFAULT_BURN_IN: f64 = 1.0;

impl EnsembleSpec {
    pub fn stationary(n: usize, bp: BoundaryParams, replicas: usize, seed: u64, modes: usize) -> Self {
        Self {
            n,
            bp,
            initial: InitialCondition::StationaryBurnIn,
            replicas,
            times: vec![0.0],
            burn_in: DEFAULT_BURN_IN,
            seed,
            modes,
            sampler: Sampler::default(),
            keep_configs: false,
        }
    }

    pub fn product(profile: Profile1D, bp: BoundaryParams, replicas: usize, times: Vec<f64>, seed: u64, modes: usize) -> Self {
        Self {
            n: profile.size(),
            bp,
            initial: InitialCondition::Product(profile),
            replicas,
            times,
            burn_in: 0.0,
            seed,
            modes,
            sampler: Sampler::default(),
            keep_configs: false,
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |m: String| Err(StatsError::InvalidSpec(m));
        if self.n < 2 {
            return bad(format!("N must be >= 2, got {}", self.n));
        }
        if self.replicas < 2 {
            return bad(format!("need at least 2 replicas, got {}", self.replicas));
        }
        if self.modes < 1 {
            return bad("need at least one mode".into());
        }
        if self.times.is_empty() {
            return bad("no observation times".into());
        }
        if self.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || self.times.windows(2).any(|w| w[1] < w[0]) {
            return bad(format!("observation times must be finite, nonnegative and sorted: {:?}", self.times));
        }
        if !(self.burn_in.is_finite() && self.burn_in >= 0.0) {
            return bad(format!("burn-in must be finite and >= 0, got {}", self.burn_in));
        }
        if let InitialCondition::Product(p) = &self.initial {
            if p.size() != self.n {
                return bad(format!("initial profile has N = {}, spec has N = {}", p.size(), self.n));
            }
            if p.interior().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad("initial profile must take values in [0, 1]".into());
            }
        }
        Ok(())
    }
}

/// Per-site mean occupation with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// `x = 1..N-1`.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

impl DensityEstimate {
    /// Largest `|mean - reference| / se` over sites with `se > 0`, and whether
    /// every site with `se == 0` matches exactly.
    pub fn max_abs_z(&self, reference: &Profile1D) -> f64 {
        self.mean
            .iter()
            .zip(&self.se)
            .zip(reference.interior())
            .map(|((m, s), r)| {
                if *s > 0.0 {
                    (m - r).abs() / s
                } else if (m - r).abs() < 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    /// Centering profile used at each observation time.
    pub centering: Vec<Profile1D>,
    /// `fields[i][r]`: replica `r` at observation time `i`.
    pub fields: Vec<Vec<FieldSample>>,
    pub density: Vec<DensityEstimate>,
    /// `configs[i][r]` when requested.
    pub configs: Option<Vec<Vec<LatticeConfig>>>,
}

struct ReplicaOutput {
    fields: Vec<FieldSample>,
    configs: Vec<LatticeConfig>,
}

fn advance_to<D: Dynamics>(sim: &mut D, target: f64, rng: &mut crate::rng::RandomStream) -> Result<(), StatsError> {
    sim.advance(target, rng, &mut ()).map_err(StatsError::from)
}

fn run_replica<D: Dynamics>(
    mut sim: D,
    spec: &EnsembleSpec,
    offset: f64,
    centering: &[Profile1D],
    projector: &ModeProjector,
    rng: &mut crate::rng::RandomStream,
) -> Result<ReplicaOutput, StatsError> {
    let mut fields = Vec::with_capacity(spec.times.len());
    let mut configs = Vec::with_capacity(spec.times.len());
    for (t, c) in spec.times.iter().zip(centering) {
        advance_to(&mut sim, offset + t, rng)?;
        fields.push(projector.project(sim.config(), c, *t));
        configs.push(sim.config().clone());
    }
    Ok(ReplicaOutput { fields, configs })
}

/// Runs `spec.replicas` independent trajectories and records the mode
/// coordinates at each observation time. Replica `r` uses the stream
/// `(seed, r)`, so results do not depend on the thread count.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleResult, StatsError> {
    spec.validate()?;
    let n = spec.n;
    let linear = Profile1D::linear(n, &spec.bp);
    let (start, offset, centering): (Profile1D, f64, Vec<Profile1D>) = match &spec.initial {
        InitialCondition::StationaryBurnIn => (linear.clone(), spec.burn_in, vec![linear; spec.times.len()]),
        InitialCondition::Product(p) => {
            let flow = HeatFlow::new(p);
            (p.clone(), 0.0, spec.times.iter().map(|&t| flow.profile_at(t)).collect())
        }
    };
    let projector = ModeProjector::new(n, spec.modes);
    let outputs: Vec<ReplicaOutput> = (0..spec.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_stream(spec.seed, r as u64);
            let init = sample_product(&start, &mut rng);
            match spec.sampler {
                Sampler::Gillespie => {
                    run_replica(Simulator::new(init, spec.bp), spec, offset, &centering, &projector, &mut rng)
                }
                Sampler::Uniformized => run_replica(
                    UniformizedSimulator::new(init, spec.bp),
                    spec,
                    offset,
                    &centering,
                    &projector,
                    &mut rng,
                ),
            }
        })
        .collect::<Result<_, _>>()?;

    let nt = spec.times.len();
    let mut fields: Vec<Vec<FieldSample>> = (0..nt).map(|_| Vec::with_capacity(spec.replicas)).collect();
    let mut configs: Vec<Vec<LatticeConfig>> = (0..nt).map(|_| Vec::with_capacity(spec.replicas)).collect();
    for out in outputs {
        for (i, (f, c)) in out.fields.into_iter().zip(out.configs).enumerate() {
            fields[i].push(f);
            configs[i].push(c);
        }
    }
    let density = configs.iter().map(|cs| density_estimate(cs)).collect();
    Ok(EnsembleResult {
        times: spec.times.clone(),
        centering,
        fields,
        density,
        configs: spec.keep_configs.then_some(configs),
    })
}

/// Site means and their standard errors over a set of configurations.
pub fn density_estimate(configs: &[LatticeConfig]) -> DensityEstimate {
    let m = configs.first().map_or(0, |c| c.occupancies().len());
    let r = configs.len() as f64;
    let mut mean = Vec::with_capacity(m);
    let mut se = Vec::with_capacity(m);
    for x in 0..m {
        let mut s = CompensatedSum::default();
        for c in configs {
            s.add(c.occupancies()[x] as f64);
        }
        let p = s.value() / r;
        mean.push(p);
        // Bernoulli variables: the sample variance is r p (1 - p) / (r - 1).
        se.push((p * (1.0 - p) / (r - 1.0).max(1.0)).sqrt());
    }
    DensityEstimate { mean, se }
}

/// Samples from one long stationary trajectory, spaced `spacing` apart after
/// the burn-in. Successive samples are correlated, so standard errors from
/// [`super::estimate_covariance`] are too small; this exists for performance
/// comparisons with the replica ensemble.
pub fn run_long_trajectory(
    n: usize,
    bp: BoundaryParams,
    samples: usize,
    spacing: f64,
    burn_in: f64,
    seed: u64,
    modes: usize,
) -> Result<Vec<FieldSample>, StatsError> {
    if !(spacing > 0.0) {
        return Err(StatsError::InvalidSpec(format!("spacing must be positive, got {spacing}")));
    }
    let linear = Profile1D::linear(n, &bp);
    let projector = ModeProjector::new(n, modes);
    let mut rng = replica_stream(seed, 0);
    let mut sim = UniformizedSimulator::new(sample_product(&linear, &mut rng), bp);
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = i as f64 * spacing;
        advance_to(&mut sim, burn_in + t, &mut rng)?;
        out.push(projector.project(sim.config(), &linear, t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bp(a: f64, b: f64) -> BoundaryParams {
        BoundaryParams::new(a, b).unwrap()
    }

    #[test]
    fn validation() {
        let mut s = EnsembleSpec::stationary(10, bp(0.2, 0.3), 10, 1, 2);
        assert!(s.validate().is_ok());
        s.times = vec![0.2, 0.1];
        assert!(s.validate().is_err());
        s.times = vec![0.0];
        s.replicas = 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn independent_of_thread_count() {
        let mut spec = EnsembleSpec::stationary(16, bp(0.2, 0.9), 40, 3, 3);
        spec.burn_in = 0.05;
        spec.times = vec![0.0, 0.01];
        let a = run_ensemble(&spec).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_ensemble(&spec).unwrap());
        assert_eq!(a.fields, b.fields);
        assert_eq!(a.density, b.density);
    }

    #[test]
    fn time_zero_product_samples_are_unevolved() {
        let b = bp(0.5, 0.5);
        let p = Profile1D::from_fn(12, &b, |_| 1.0).unwrap();
        let mut spec = EnsembleSpec::product(p.clone(), b, 5, vec![0.0], 9, 2);
        spec.keep_configs = true;
        let r = run_ensemble(&spec).unwrap();
        for c in &r.configs.as_ref().unwrap()[0] {
            assert_eq!(c, &LatticeConfig::full(12));
        }
        assert!(r.fields[0].iter().all(|f| f.y.iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn samplers_agree_on_equilibrium_variance() {
        for sampler in [Sampler::Gillespie, Sampler::Uniformized] {
            let mut spec = EnsembleSpec::stationary(20, bp(0.5, 0.5), 4000, 17, 2);
            spec.burn_in = 0.1;
            spec.sampler = sampler;
            let r = run_ensemble(&spec).unwrap();
            let c = super::super::estimate_covariance(&r.fields[0]).unwrap();
            // N^{-1} sum_x e_1(x/N)^2 / 4 = 1/4 exactly for the discrete sine.
            assert!((c.get(1, 1) - 0.25).abs() < 4.0 * c.se(1, 1));
            assert!(c.get(1, 2).abs() < 4.0 * c.se(1, 2));
        }
    }
}
