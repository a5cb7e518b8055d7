//! Dynkin martingale of a single mode of the density field.
//!
//! For `H = e_j` (which vanishes at 0 and 1) let `A(eta) = sum_x H(x/N) eta(x)`.
//! Since `Delta_N e_j = -mu_j e_j` on the grid, with
//! `mu_j = 4 N^2 sin^2(j pi / 2N)`, summation by parts gives
//!
//! ```text
//! N^2 L_N A^{N^-1/2} = N^{-1/2} (-mu_j A) + N^{3/2} (H(1/N) alpha + H(1 - 1/N) beta)
//! ```
//!
//! so `M_t = N^{-1/2} [A_t - A_0 + mu_j int_0^t A_s ds] - N^{3/2} b t` with
//! `b = H(1/N) alpha + H(1 - 1/N) beta` is a martingale. Centering at the
//! semidiscrete heat flow adds a deterministic term that cancels exactly,
//! so this equals `Y_t - Y_0 - int Y_s(Delta_N H) ds` for the centred field.
//!
//! The realized quadratic variation is `N^{-1} sum_jumps (Delta A)^2`, to be
//! compared with `int_0^t Gamma ds`, where `Gamma = N G(eta)` and
//! `G = sum_active bonds (H(x+1) - H(x))^2 + r_left H(1/N)^2 + r_right H(1-1/N)^2`
//! (in diffusive time, `ds = dt_micro / N^2`).

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use super::estimate::CompensatedSum;
use super::StatsError;
use crate::pde::Profile1D;
use crate::process::{sample_product, BoundaryParams, Dynamics, Event, LatticeConfig, PathObserver, UniformizedSimulator};
use crate::rng::replica_stream;

/// Path observer accumulating the pieces of the martingale for one mode.
#[derive(Debug, Clone)]
pub struct MartingaleRecorder {
    n: usize,
    bp: BoundaryParams,
    h: Vec<f64>,
    // (H(x+1) - H(x))^2 for bonds x = 1..N-2, indexed x - 1
    bond_weight: Vec<f64>,
    a: f64,
    a_integral: CompensatedSum,
    bulk: f64,
    realized_qv: CompensatedSum,
    gamma_bulk: CompensatedSum,
    gamma_boundary: CompensatedSum,
    events: u64,
}

const RESYNC_EVERY: u64 = 1 << 16;

impl MartingaleRecorder {
    pub fn new(config: &LatticeConfig, bp: BoundaryParams, mode: usize) -> Self {
        let n = config.size();
        let nf = n as f64;
        // index x = 0..N, with H(0) = H(1) = 0
        let h: Vec<f64> = (0..=n).map(|x| SQRT_2 * (PI * (mode * x) as f64 / nf).sin()).collect();
        let bond_weight = (1..n.saturating_sub(1)).map(|x| (h[x + 1] - h[x]).powi(2)).collect();
        let mut rec = Self {
            n,
            bp,
            h,
            bond_weight,
            a: 0.0,
            a_integral: CompensatedSum::default(),
            bulk: 0.0,
            realized_qv: CompensatedSum::default(),
            gamma_bulk: CompensatedSum::default(),
            gamma_boundary: CompensatedSum::default(),
            events: 0,
        };
        rec.resync(config);
        rec
    }

    fn resync(&mut self, config: &LatticeConfig) {
        let occ = config.occupancies();
        self.a = occ.iter().enumerate().map(|(i, &e)| self.h[i + 1] * e as f64).sum();
        self.bulk = occ
            .windows(2)
            .zip(&self.bond_weight)
            .filter(|(w, _)| w[0] != w[1])
            .map(|(_, g)| g)
            .sum();
    }

    fn boundary_rate(&self, config: &LatticeConfig) -> f64 {
        let occ = config.occupancies();
        let last = occ.len() - 1;
        self.bp.left_rate(occ[0] == 1) * self.h[1].powi(2) + self.bp.right_rate(occ[last] == 1) * self.h[last + 1].powi(2)
    }

    /// `G(eta)` at the current state; `N G` equals `gamma_field` for `e_j`.
    pub fn gamma_density(&self, config: &LatticeConfig) -> f64 {
        self.bulk + self.boundary_rate(config)
    }

    /// `sum_x H(x/N) eta(x)`.
    pub fn linear_statistic(&self) -> f64 {
        self.a
    }

    fn bond_active(occ: &[u8], b: usize) -> bool {
        occ[b] != occ[b + 1]
    }

    // Bond indices b = 0..N-3 refer to sites (b+1, b+2).
    fn bond_delta(&self, occ: &[u8], sites: &[usize]) -> f64 {
        let nb = self.bond_weight.len();
        let mut d = 0.0;
        for &s in sites {
            // bonds touching 0-based site s: s - 1 and s
            if s >= 1 && s - 1 < nb && Self::bond_active(occ, s - 1) {
                d += self.bond_weight[s - 1];
            }
            if s < nb && Self::bond_active(occ, s) {
                d += self.bond_weight[s];
            }
        }
        d
    }
}

impl PathObserver for MartingaleRecorder {
    fn hold(&mut self, config: &LatticeConfig, micro_dt: f64) {
        let n2 = (self.n * self.n) as f64;
        let ds = micro_dt / n2;
        self.a_integral.add(self.a * ds);
        let nf = self.n as f64;
        self.gamma_bulk.add(nf * self.bulk * ds);
        self.gamma_boundary.add(nf * self.boundary_rate(config) * ds);
    }

    fn jump(&mut self, config: &LatticeConfig, event: Event) {
        let occ = config.occupancies();
        let (delta_a, touched): (f64, [usize; 2]) = match event {
            Event::Swap(x) => {
                let i = x - 1;
                let d = (self.h[x + 1] - self.h[x]) * (occ[i] as f64 - occ[i + 1] as f64);
                (d, [i, i + 1])
            }
            Event::LeftFlip => (self.h[1] * (1.0 - 2.0 * occ[0] as f64), [0, 0]),
            Event::RightFlip => {
                let i = occ.len() - 1;
                (self.h[i + 1] * (1.0 - 2.0 * occ[i] as f64), [i, i])
            }
        };
        let sites: &[usize] = if touched[0] == touched[1] { &touched[..1] } else { &touched };
        // Bond activity around the touched sites, before and after the event.
        let before = self.bond_delta(occ, sites);
        let mut after_cfg = config.clone();
        event.apply(&mut after_cfg);
        let after = self.bond_delta(after_cfg.occupancies(), sites);
        // A swap is counted twice at its own bond, which stays active.
        self.bulk += after - before;
        self.a += delta_a;
        self.realized_qv.add(delta_a * delta_a / self.n as f64);
        self.events += 1;
        if self.events.is_multiple_of(RESYNC_EVERY) {
            self.resync(&after_cfg);
        }
    }
}

/// Martingale and compensator values on the recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTrajectory {
    pub times: Vec<f64>,
    /// `M_t` at each grid time (first entry 0).
    pub martingale: Vec<f64>,
    /// `N^{-1} sum (Delta A)^2` up to each grid time.
    pub realized_qv: Vec<f64>,
    /// `int_0^t Gamma ds` up to each grid time.
    pub predicted_qv: Vec<f64>,
    /// Boundary part of `int_0^t Gamma ds` at the final time.
    pub boundary_qv: f64,
}

/// Records one trajectory on the grid `0, dt, 2 dt, .., t_end`.
pub fn record_martingale(
    start: LatticeConfig,
    bp: BoundaryParams,
    mode: usize,
    t_end: f64,
    dt_record: f64,
    rng: &mut crate::rng::RandomStream,
) -> Result<MartingaleTrajectory, StatsError> {
    if !(dt_record > 0.0 && t_end >= 0.0) {
        return Err(StatsError::InvalidSpec(format!("bad grid: t_end = {t_end}, dt = {dt_record}")));
    }
    let n = start.size();
    let nf = n as f64;
    let mu = 4.0 * nf * nf * (mode as f64 * PI / (2.0 * nf)).sin().powi(2);
    let mut rec = MartingaleRecorder::new(&start, bp, mode);
    let b = rec.h[1] * bp.alpha() + rec.h[n - 1] * bp.beta();
    let a0 = rec.a;
    let steps = (t_end / dt_record).round() as usize;
    let mut sim = UniformizedSimulator::new(start, bp);
    let mut out = MartingaleTrajectory {
        times: vec![0.0],
        martingale: vec![0.0],
        realized_qv: vec![0.0],
        predicted_qv: vec![0.0],
        boundary_qv: 0.0,
    };
    for i in 1..=steps {
        let t = if i == steps { t_end } else { i as f64 * dt_record };
        sim.advance(t, rng, &mut rec)?;
        rec.resync(sim.config());
        let m = (rec.a - a0 + mu * rec.a_integral.value()) / nf.sqrt() - nf.powf(1.5) * b * t;
        out.times.push(t);
        out.martingale.push(m);
        out.realized_qv.push(rec.realized_qv.value());
        out.predicted_qv.push(rec.gamma_bulk.value() + rec.gamma_boundary.value());
    }
    out.boundary_qv = rec.gamma_boundary.value();
    Ok(out)
}

/// Summary over replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub replicas: usize,
    /// z-score of the replica mean of each grid increment of `M`.
    pub increment_z: Vec<f64>,
    /// z-score of the replica mean of `M_T`.
    pub final_z: f64,
    /// `sum realized QV / sum int Gamma ds` at the final time.
    pub qv_ratio: f64,
    /// `mean M_T^2 / mean int_0^T Gamma ds`, with its standard error.
    pub second_moment_ratio: f64,
    pub second_moment_ratio_se: f64,
    /// Share of `int Gamma ds` from the two boundary terms.
    pub boundary_share: f64,
}

impl MartingaleReport {
    pub fn max_increment_z(&self) -> f64 {
        self.increment_z.iter().fold(self.final_z.abs(), |m, z| m.max(z.abs()))
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mean, n) = super::estimate::compensated_mean(values.clone());
    let mut s = CompensatedSum::default();
    for v in values {
        s.add((v - mean).powi(2));
    }
    let var = s.value() / (n as f64 - 1.0).max(1.0);
    (mean, (var / n as f64).sqrt())
}

pub fn martingale_diagnostic(trajectories: &[MartingaleTrajectory]) -> Result<MartingaleReport, StatsError> {
    let r = trajectories.len();
    if r < 2 {
        return Err(StatsError::TooFewSamples { got: r, need: 2 });
    }
    let len = trajectories[0].times.len();
    if len < 2 || trajectories.iter().any(|t| t.times.len() != len) {
        return Err(StatsError::Degenerate("trajectories must share a grid with at least one step".into()));
    }
    let z = |(m, se): (f64, f64)| if se > 0.0 { m / se } else { 0.0 };
    let increment_z = (1..len)
        .map(|i| z(mean_and_se(trajectories.iter().map(move |t| t.martingale[i] - t.martingale[i - 1]))))
        .collect();
    let final_z = z(mean_and_se(trajectories.iter().map(|t| t.martingale[len - 1])));
    let mut realized = CompensatedSum::default();
    let mut predicted = CompensatedSum::default();
    let mut boundary = CompensatedSum::default();
    for t in trajectories {
        realized.add(t.realized_qv[len - 1]);
        predicted.add(t.predicted_qv[len - 1]);
        boundary.add(t.boundary_qv);
    }
    let (m2, m2_se) = mean_and_se(trajectories.iter().map(|t| t.martingale[len - 1].powi(2)));
    let mean_pred = predicted.value() / r as f64;
    Ok(MartingaleReport {
        replicas: r,
        increment_z,
        final_z,
        qv_ratio: realized.value() / predicted.value(),
        second_moment_ratio: m2 / mean_pred,
        second_moment_ratio_se: m2_se / mean_pred,
        boundary_share: boundary.value() / predicted.value(),
    })
}

/// Records `replicas` trajectories from the product measure of `profile`.
pub fn run_martingale_ensemble(
    profile: &Profile1D,
    bp: BoundaryParams,
    mode: usize,
    t_end: f64,
    dt_record: f64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<MartingaleTrajectory>, StatsError> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_stream(seed, r as u64);
            let start = sample_product(profile, &mut rng);
            record_martingale(start, bp, mode, t_end, dt_record, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{gamma_field, Simulator};

    #[test]
    fn incremental_gamma_matches_direct_evaluation() {
        let bp = BoundaryParams::new(0.2, 0.7).unwrap();
        let n = 15;
        let mut rng = replica_stream(8, 0);
        let start = sample_product(&Profile1D::linear(n, &bp), &mut rng);
        let mut rec = MartingaleRecorder::new(&start, bp, 2);
        let mut sim = Simulator::new(start, bp);
        for _ in 0..500 {
            let before = sim.config().clone();
            let (event, _) = sim.step(&mut rng).unwrap();
            rec.jump(&before, event);
            let direct = gamma_field(sim.config(), &bp, |u| SQRT_2 * (2.0 * PI * u).sin());
            assert!((n as f64 * rec.gamma_density(sim.config()) - direct).abs() < 1e-9);
            let a: f64 = (1..n).map(|x| rec.h[x] * sim.config().get(x) as f64).sum();
            assert!((rec.linear_statistic() - a).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_and_shapes() {
        let bp = BoundaryParams::new(0.1, 0.9).unwrap();
        let mut rng = replica_stream(2, 0);
        let start = sample_product(&Profile1D::linear(20, &bp), &mut rng);
        let t = record_martingale(start, bp, 1, 0.1, 0.025, &mut rng).unwrap();
        assert_eq!(t.times.len(), 5);
        assert!((t.times[4] - 0.1).abs() < 1e-15);
        assert!(t.predicted_qv.windows(2).all(|w| w[1] >= w[0]));
        assert!(t.boundary_qv <= t.predicted_qv[4]);
    }
}
