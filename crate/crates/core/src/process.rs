//! Continuous-time simulation of the open symmetric exclusion chain.
//!
//! Sites are labelled `1..=N-1`. Each bond `(x, x+1)` exchanges occupations
//! at rate 1; site 1 is flipped at rate `alpha` when empty and `1 - alpha`
//! when occupied, site `N-1` likewise with `beta`.
//!
//! [`Simulator`] runs the direct Gillespie method on a rate table that is
//! updated locally after each event: only bonds whose endpoints differ are
//! kept (swapping equal values is a no-op, so dropping them leaves the law of
//! the path unchanged), plus the two boundary flip rates. Picking an event is
//! O(1).
//!
//! [`UniformizedSimulator`] samples the same law by thinning a constant-rate
//! candidate stream. It is the faster choice for ensembles; the
//! [`Dynamics`] trait lets drivers use either.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use thiserror::Error;

use crate::pde::Profile1D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("boundary densities must lie in [0, 1], got alpha = {alpha}, beta = {beta}")]
    InvalidBoundary { alpha: f64, beta: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("absorbing state reached at microscopic time {micro_time}")]
    Absorbing { micro_time: f64 },
    #[error("time must be finite and nonnegative, got {0}")]
    InvalidTime(f64),
}

/// Reservoir densities at the two ends of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    alpha: f64,
    beta: f64,
}

impl BoundaryParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ProcessError> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !ok(alpha) || !ok(beta) {
            return Err(ProcessError::InvalidBoundary { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_equilibrium(&self) -> bool {
        self.alpha == self.beta
    }

    /// Flip rate at site 1 given its occupation.
    #[inline]
    pub fn left_rate(&self, occupied: bool) -> f64 {
        if occupied {
            1.0 - self.alpha
        } else {
            self.alpha
        }
    }

    /// Flip rate at site N-1 given its occupation.
    #[inline]
    pub fn right_rate(&self, occupied: bool) -> f64 {
        if occupied {
            1.0 - self.beta
        } else {
            self.beta
        }
    }
}

/// Occupation numbers `eta(1), ..., eta(N-1)` of a chain of size `N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeConfig {
    occ: Vec<u8>,
}

impl LatticeConfig {
    pub fn new(n: usize, occ: Vec<u8>) -> Result<Self, ProcessError> {
        if n < 2 {
            return Err(ProcessError::InvalidConfig(format!("N must be at least 2, got {n}")));
        }
        if occ.len() != n - 1 {
            return Err(ProcessError::InvalidConfig(format!(
                "expected {} sites, got {}",
                n - 1,
                occ.len()
            )));
        }
        if let Some(bad) = occ.iter().find(|&&v| v > 1) {
            return Err(ProcessError::InvalidConfig(format!("occupation {bad} is not 0 or 1")));
        }
        Ok(Self { occ })
    }

    pub fn empty(n: usize) -> Self {
        assert!(n >= 2, "N must be at least 2");
        Self { occ: vec![0; n - 1] }
    }

    pub fn full(n: usize) -> Self {
        assert!(n >= 2, "N must be at least 2");
        Self { occ: vec![1; n - 1] }
    }

    /// Configuration whose site `x` holds bit `x - 1` of `bits`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        assert!((2..=64).contains(&n), "bit encoding supports 2 <= N <= 64");
        Self { occ: (0..n - 1).map(|i| ((bits >> i) & 1) as u8).collect() }
    }

    /// Little-endian state index: bit `x - 1` is `eta(x)`.
    pub fn to_bits(&self) -> u64 {
        assert!(self.occ.len() <= 63);
        self.occ.iter().enumerate().fold(0, |acc, (i, &v)| acc | ((v as u64) << i))
    }

    /// System size `N`.
    pub fn size(&self) -> usize {
        self.occ.len() + 1
    }

    /// `eta(x)` for `x` in `1..=N-1`.
    #[inline]
    pub fn get(&self, x: usize) -> u8 {
        self.occ[x - 1]
    }

    pub fn occupancies(&self) -> &[u8] {
        &self.occ
    }

    pub fn particle_count(&self) -> usize {
        self.occ.iter().map(|&v| v as usize).sum()
    }

    /// `sigma^{x,x+1}`.
    pub fn swap_bond(&mut self, x: usize) {
        self.occ.swap(x - 1, x);
    }

    /// `sigma^x`.
    pub fn flip(&mut self, x: usize) {
        self.occ[x - 1] ^= 1;
    }
}

/// A transition of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// Exchange across bond `(x, x+1)`.
    Swap(usize),
    LeftFlip,
    RightFlip,
}

impl Event {
    pub fn apply(&self, config: &mut LatticeConfig) {
        match *self {
            Event::Swap(x) => config.swap_bond(x),
            Event::LeftFlip => config.flip(1),
            Event::RightFlip => {
                let last = config.size() - 1;
                config.flip(last)
            }
        }
    }
}

/// All transitions with strictly positive rate out of `config`.
pub fn event_rates(config: &LatticeConfig, bp: &BoundaryParams) -> Vec<(Event, f64)> {
    let occ = config.occupancies();
    let mut out: Vec<(Event, f64)> = occ
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| (Event::Swap(i + 1), 1.0))
        .collect();
    let left = bp.left_rate(occ[0] == 1);
    if left > 0.0 {
        out.push((Event::LeftFlip, left));
    }
    let right = bp.right_rate(occ[occ.len() - 1] == 1);
    if right > 0.0 {
        out.push((Event::RightFlip, right));
    }
    out
}

/// Microscopic clock of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    n: usize,
    micro_time: f64,
}

impl SimClock {
    pub fn new(n: usize) -> Self {
        Self { n, micro_time: 0.0 }
    }

    pub fn micro_time(&self) -> f64 {
        self.micro_time
    }

    /// Microscopic time divided by `N^2`.
    pub fn diffusive_time(&self) -> f64 {
        self.micro_time / (self.n * self.n) as f64
    }
}

/// Receives the piecewise-constant path of a trajectory.
///
/// `hold` is called for every sojourn with the state being held and its
/// length in microscopic time; `jump` is called with the state just before
/// `event` is applied. Consecutive holds may refer to the same state.
pub trait PathObserver {
    /// `false` lets samplers skip path bookkeeping entirely.
    const TRACKS_PATH: bool = true;

    fn hold(&mut self, _config: &LatticeConfig, _micro_dt: f64) {}
    fn jump(&mut self, _config: &LatticeConfig, _event: Event) {}
}

impl PathObserver for () {
    const TRACKS_PATH: bool = false;
}

const ABSENT: u32 = u32::MAX;

/// Gillespie simulator with an incrementally maintained rate table.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: LatticeConfig,
    bp: BoundaryParams,
    // Active bonds, stored by their left site index (0-based).
    active: Vec<u32>,
    slot: Vec<u32>,
    left_rate: f64,
    right_rate: f64,
    clock: SimClock,
}

impl Simulator {
    pub fn new(config: LatticeConfig, bp: BoundaryParams) -> Self {
        let n = config.size();
        let mut sim = Self {
            active: Vec::with_capacity(n),
            slot: vec![ABSENT; n.saturating_sub(2)],
            left_rate: 0.0,
            right_rate: 0.0,
            clock: SimClock::new(n),
            config,
            bp,
        };
        for b in 0..sim.slot.len() {
            sim.refresh_bond(b);
        }
        sim.refresh_boundaries();
        sim
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.config
    }

    pub fn into_config(self) -> LatticeConfig {
        self.config
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.bp
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn active_bonds(&self) -> usize {
        self.active.len()
    }

    pub fn left_rate(&self) -> f64 {
        self.left_rate
    }

    pub fn right_rate(&self) -> f64 {
        self.right_rate
    }

    #[inline]
    pub fn total_rate(&self) -> f64 {
        self.active.len() as f64 + self.left_rate + self.right_rate
    }

    #[inline]
    fn refresh_bond(&mut self, b: usize) {
        let occ = self.config.occupancies();
        let on = occ[b] != occ[b + 1];
        let present = self.slot[b] != ABSENT;
        if on && !present {
            self.slot[b] = self.active.len() as u32;
            self.active.push(b as u32);
        } else if !on && present {
            let at = self.slot[b] as usize;
            let last = *self.active.last().expect("active set out of sync");
            self.active.swap_remove(at);
            if last as usize != b {
                self.slot[last as usize] = at as u32;
            }
            self.slot[b] = ABSENT;
        }
    }

    #[inline]
    fn refresh_boundaries(&mut self) {
        let occ = self.config.occupancies();
        self.left_rate = self.bp.left_rate(occ[0] == 1);
        self.right_rate = self.bp.right_rate(occ[occ.len() - 1] == 1);
    }

    #[inline]
    fn choose<R: Rng + ?Sized>(&self, rng: &mut R, total: f64) -> Event {
        let u = rng.random::<f64>() * total;
        let na = self.active.len();
        if u < na as f64 {
            let idx = (u as usize).min(na - 1);
            return Event::Swap(self.active[idx] as usize + 1);
        }
        let v = u - na as f64;
        if (v < self.left_rate && self.left_rate > 0.0) || self.right_rate <= 0.0 {
            Event::LeftFlip
        } else {
            Event::RightFlip
        }
    }

    /// Apply `event` and update the rate table.
    #[inline]
    pub fn apply(&mut self, event: Event) {
        let bonds = self.slot.len();
        match event {
            Event::Swap(x) => {
                let b = x - 1;
                self.config.swap_bond(x);
                if b > 0 {
                    self.refresh_bond(b - 1);
                }
                if b + 1 < bonds {
                    self.refresh_bond(b + 1);
                }
                if b == 0 || b + 1 == bonds {
                    self.refresh_boundaries();
                }
            }
            Event::LeftFlip => {
                self.config.flip(1);
                if bonds > 0 {
                    self.refresh_bond(0);
                }
                self.refresh_boundaries();
            }
            Event::RightFlip => {
                let last = self.config.size() - 1;
                self.config.flip(last);
                if bonds > 0 {
                    self.refresh_bond(bonds - 1);
                }
                self.refresh_boundaries();
            }
        }
    }

    /// One Gillespie step; returns the event and its waiting time.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(Event, f64), ProcessError> {
        let total = self.total_rate();
        if total <= 0.0 {
            return Err(ProcessError::Absorbing { micro_time: self.clock.micro_time });
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / total;
        let event = self.choose(rng, total);
        self.apply(event);
        self.clock.micro_time += dt;
        Ok((event, dt))
    }

    /// Run until the diffusive clock reads `target`.
    ///
    /// The event whose time would exceed the horizon is not applied; its
    /// waiting time is discarded, which is exact by memorylessness.
    pub fn run_until<R: Rng + ?Sized>(&mut self, target: f64, rng: &mut R) -> Result<(), ProcessError> {
        self.run_until_observed(target, rng, &mut ())
    }

    pub fn run_until_observed<R, O>(&mut self, target: f64, rng: &mut R, observer: &mut O) -> Result<(), ProcessError>
    where
        R: Rng + ?Sized,
        O: PathObserver + ?Sized,
    {
        if !target.is_finite() {
            return Err(ProcessError::InvalidTime(target));
        }
        let n = self.config.size() as f64;
        let horizon = target * n * n;
        if horizon < self.clock.micro_time {
            return Err(ProcessError::InvalidTime(target));
        }
        loop {
            let total = self.total_rate();
            if total <= 0.0 {
                return Err(ProcessError::Absorbing { micro_time: self.clock.micro_time });
            }
            let dt: f64 = rng.sample::<f64, _>(Exp1) / total;
            let now = self.clock.micro_time;
            if now + dt > horizon {
                observer.hold(&self.config, horizon - now);
                self.clock.micro_time = horizon;
                return Ok(());
            }
            observer.hold(&self.config, dt);
            let event = self.choose(rng, total);
            observer.jump(&self.config, event);
            self.apply(event);
            self.clock.micro_time = now + dt;
        }
    }
}

/// A sampler of the chain's path law.
pub trait Dynamics {
    fn config(&self) -> &LatticeConfig;
    fn clock(&self) -> &SimClock;
    /// Advance to diffusive time `target`, reporting the path to `observer`.
    fn advance<R, O>(&mut self, target: f64, rng: &mut R, observer: &mut O) -> Result<(), ProcessError>
    where
        R: Rng + ?Sized,
        O: PathObserver + ?Sized;
}

impl Dynamics for Simulator {
    fn config(&self) -> &LatticeConfig {
        &self.config
    }

    fn clock(&self) -> &SimClock {
        &self.clock
    }

    fn advance<R, O>(&mut self, target: f64, rng: &mut R, observer: &mut O) -> Result<(), ProcessError>
    where
        R: Rng + ?Sized,
        O: PathObserver + ?Sized,
    {
        self.run_until_observed(target, rng, observer)
    }
}

/// Constant-rate (uniformized) sampler of the same path law.
///
/// Candidates arrive at rate `N`: each is a bond chosen uniformly among the
/// `N - 2` bonds or one of the two boundary sites. A bond candidate swaps the
/// two occupations (a no-op on inactive bonds); a boundary candidate flips
/// its site with probability equal to the flip rate, which is at most 1. The
/// thinned process has exactly the rates of [`event_rates`]. It needs no rate
/// table, and in the driven regime it runs about 2.5 times faster per
/// accepted event than [`Simulator`] despite the rejected candidates.
#[derive(Debug, Clone)]
pub struct UniformizedSimulator {
    config: LatticeConfig,
    bp: BoundaryParams,
    particles: usize,
    clock: SimClock,
}

impl UniformizedSimulator {
    pub fn new(config: LatticeConfig, bp: BoundaryParams) -> Self {
        let n = config.size();
        Self { particles: config.particle_count(), config, bp, clock: SimClock::new(n) }
    }

    pub fn params(&self) -> &BoundaryParams {
        &self.bp
    }

    pub fn into_config(self) -> LatticeConfig {
        self.config
    }

    // Absorbing states exist only when both reservoirs are pinned to the
    // same value and the chain is uniformly at that value.
    fn is_absorbing(&self) -> bool {
        let (a, b) = (self.bp.alpha(), self.bp.beta());
        (a == 0.0 && b == 0.0 && self.particles == 0)
            || (a == 1.0 && b == 1.0 && self.particles == self.config.occ.len())
    }

    pub fn run_until<R: Rng + ?Sized>(&mut self, target: f64, rng: &mut R) -> Result<(), ProcessError> {
        self.advance(target, rng, &mut ())
    }

    // Without an observer the candidate times are irrelevant: only their
    // number, Poisson with mean `N * (horizon - now)`, and their order matter.
    fn advance_unobserved<R: Rng + ?Sized>(&mut self, horizon: f64, rng: &mut R) -> Result<(), ProcessError> {
        let mean = self.config.size() as f64 * (horizon - self.clock.micro_time);
        if mean <= 0.0 {
            return Ok(());
        }
        let count = Poisson::new(mean)
            .map_err(|e| ProcessError::InvalidConfig(format!("candidate count: {e}")))?
            .sample(rng) as u64;
        let n = self.config.size() as u32;
        let bonds = n as usize - 2;
        let threshold = n.wrapping_neg() % n;
        let (alpha, beta) = (self.bp.alpha(), self.bp.beta());
        // Absorption is possible only into the all-alpha state when alpha == beta
        // is 0 or 1.
        let absorbing_count = match (alpha, beta) {
            (a, b) if a == 0.0 && b == 0.0 => Some(0),
            (a, b) if a == 1.0 && b == 1.0 => Some(bonds + 1),
            _ => None,
        };
        let occ = &mut self.config.occ;
        for _ in 0..count {
            let k = loop {
                let m = (rng.next_u64() >> 32) * n as u64;
                if (m as u32) >= threshold {
                    break (m >> 32) as usize;
                }
            };
            if k < bonds {
                // Branch-free swap; equal values make it a no-op.
                let (a, b) = (occ[k], occ[k + 1]);
                occ[k] = b;
                occ[k + 1] = a;
                continue;
            }
            let (site, p) = if k == bonds { (0, alpha) } else { (bonds, beta) };
            let flip_rate = if occ[site] == 1 { 1.0 - p } else { p };
            if rng.random::<f64>() < flip_rate {
                if occ[site] == 1 {
                    self.particles -= 1;
                } else {
                    self.particles += 1;
                }
                occ[site] ^= 1;
                if absorbing_count == Some(self.particles) {
                    // The exact absorption time is not tracked on this path.
                    self.clock.micro_time = horizon;
                    return Err(ProcessError::Absorbing { micro_time: horizon });
                }
            }
        }
        self.clock.micro_time = horizon;
        Ok(())
    }
}

impl Dynamics for UniformizedSimulator {
    fn config(&self) -> &LatticeConfig {
        &self.config
    }

    fn clock(&self) -> &SimClock {
        &self.clock
    }

    fn advance<R, O>(&mut self, target: f64, rng: &mut R, observer: &mut O) -> Result<(), ProcessError>
    where
        R: Rng + ?Sized,
        O: PathObserver + ?Sized,
    {
        if !target.is_finite() {
            return Err(ProcessError::InvalidTime(target));
        }
        let n = self.config.size();
        let horizon = target * (n * n) as f64;
        if horizon < self.clock.micro_time {
            return Err(ProcessError::InvalidTime(target));
        }
        if self.is_absorbing() {
            return Err(ProcessError::Absorbing { micro_time: self.clock.micro_time });
        }
        if !O::TRACKS_PATH {
            return self.advance_unobserved(horizon, rng);
        }
        let bonds = n - 2;
        let last = n - 2;
        let rate = n as f64;
        let (alpha, beta) = (self.bp.alpha(), self.bp.beta());
        // Time since the last accepted event.
        let mut held = 0.0;
        let mut now = self.clock.micro_time;
        loop {
            let dt: f64 = rng.sample::<f64, _>(Exp1) / rate;
            if now + dt > horizon {
                observer.hold(&self.config, held + (horizon - now));
                self.clock.micro_time = horizon;
                return Ok(());
            }
            now += dt;
            held += dt;
            let k = uniform_below(rng, n as u32) as usize;
            let occ = &mut self.config.occ;
            if k < bonds {
                if occ[k] == occ[k + 1] {
                    continue;
                }
                let event = Event::Swap(k + 1);
                observer.hold(&self.config, held);
                observer.jump(&self.config, event);
                self.config.occ.swap(k, k + 1);
            } else {
                let (site, p, event) = if k == bonds {
                    (0, alpha, Event::LeftFlip)
                } else {
                    (last, beta, Event::RightFlip)
                };
                let flip_rate = if occ[site] == 1 { 1.0 - p } else { p };
                if rng.random::<f64>() >= flip_rate {
                    continue;
                }
                observer.hold(&self.config, held);
                observer.jump(&self.config, event);
                let occ = &mut self.config.occ;
                if occ[site] == 1 {
                    self.particles -= 1;
                } else {
                    self.particles += 1;
                }
                occ[site] ^= 1;
                if self.is_absorbing() {
                    self.clock.micro_time = now;
                    return Err(ProcessError::Absorbing { micro_time: now });
                }
            }
            held = 0.0;
            self.clock.micro_time = now;
        }
    }
}

/// Unbiased integer in `0..n` by Lemire's multiply-and-reject method.
#[inline]
fn uniform_below<R: Rng + ?Sized>(rng: &mut R, n: u32) -> u32 {
    let mut m = rng.next_u32() as u64 * n as u64;
    if (m as u32) < n {
        let threshold = n.wrapping_neg() % n;
        while (m as u32) < threshold {
            m = rng.next_u32() as u64 * n as u64;
        }
    }
    (m >> 32) as u32
}

/// Single Gillespie step from `config`.
pub fn kmc_step<R: Rng + ?Sized>(
    config: &LatticeConfig,
    bp: &BoundaryParams,
    rng: &mut R,
) -> Result<(LatticeConfig, f64), ProcessError> {
    let mut sim = Simulator::new(config.clone(), *bp);
    let (_, dt) = sim.step(rng)?;
    Ok((sim.into_config(), dt))
}

/// State after `tau` units of diffusive time (`N^2 tau` microscopic).
pub fn evolve<R: Rng + ?Sized>(
    config: &LatticeConfig,
    bp: &BoundaryParams,
    tau: f64,
    rng: &mut R,
) -> Result<LatticeConfig, ProcessError> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(ProcessError::InvalidTime(tau));
    }
    if tau == 0.0 {
        return Ok(config.clone());
    }
    let mut sim = Simulator::new(config.clone(), *bp);
    sim.run_until(tau, rng)?;
    Ok(sim.into_config())
}

/// Independent Bernoulli occupations with `P[eta(x) = 1] = profile(x)`.
pub fn sample_product<R: Rng + ?Sized>(profile: &Profile1D, rng: &mut R) -> LatticeConfig {
    let n = profile.size();
    let occ = (1..n)
        .map(|x| (rng.random::<f64>() < profile.value(x)) as u8)
        .collect();
    LatticeConfig { occ }
}

/// Carré du champ `N^2 { L Y(H)^2 - 2 Y(H) L Y(H) }` of the density field.
///
/// The bulk part is `N^-1 sum_x [eta(x+1) - eta(x)]^2 (grad_N H)(x/N)^2`.
/// Each boundary part is `N^-1 (grad_N H)^2` at the end bond times the flip
/// rate at that end, `alpha (1 - eta(1)) + (1 - alpha) eta(1)` on the left.
/// For test functions vanishing at 0 and 1 this is exactly the generator
/// expression.
pub fn gamma_field(config: &LatticeConfig, bp: &BoundaryParams, h: impl Fn(f64) -> f64) -> f64 {
    let n = config.size();
    let nf = n as f64;
    let grad = |x: usize| nf * (h((x + 1) as f64 / nf) - h(x as f64 / nf));
    let occ = config.occupancies();
    let bulk: f64 = occ
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| grad(i + 1).powi(2))
        .sum();
    let left = grad(0).powi(2) * bp.left_rate(occ[0] == 1);
    let right = grad(n - 1).powi(2) * bp.right_rate(occ[n - 2] == 1);
    (bulk + left + right) / nf
}
