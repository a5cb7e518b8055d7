//! One function per subcommand. Each returns the criteria it checked and the
//! tables it produced; nothing is written here.

use rand::Rng;

use ssep_core::exact::{build_generator_dense, exact_profile, exact_two_point, fit_sign, stationary_distribution};
use ssep_core::io;
use ssep_core::ou::{
    lyapunov_residual, lyapunov_stationary, max_stable_dt, noise_covariance, ou_long_run_covariance, simulate_ou,
    stationary_noise_covariance, NoiseSource, OuSpec, Stepper,
};
use ssep_core::pde::{
    correlation_evolution, gradient_maxprinciple_check, green_closed_form, solve_green_triangle, solve_heat_1d,
    solve_parabolic_triangle, DiagonalSource, ParabolicOptions, PdeError, Profile1D, TriangleField,
};
use ssep_core::process::BoundaryParams;
use ssep_core::rng::{keyed_stream, RandomStream};
use ssep_core::spectral::{
    dynamic_covariance_matrix, eigenvalue, inverse_laplacian, semigroup_apply, stationary_covariance,
    stationary_covariance_matrix, stationary_covariance_quadrature, ContinuumProfile, ModeVector, SineBasis, J_HEAT,
};
use ssep_core::stats::{
    estimate_covariance, gaussianity_check, martingale_diagnostic, run_ensemble, run_martingale_ensemble,
    EnsembleSpec, GAUSSIANITY_THRESHOLD,
};

use crate::config::{Command, Resolved};
use crate::report::{CriterionKind::*, CriterionOutcome, Report, Table};
use crate::CliError;

/// Covariance tolerance `max(4 SE, floor)`.
pub const SIGMAS: f64 = 4.0;
/// Allowance for the O(1/N) finite-size bias away from equilibrium.
pub const FINITE_SIZE_FLOOR: f64 = 0.02;

pub const PROFILE_TOL: f64 = 1e-12;
pub const TWO_POINT_TOL: f64 = 1e-10;
pub const GREEN_TOL: f64 = 1e-8;
pub const LYAPUNOV_TOL: f64 = 1e-6;
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-12;
pub const BOUND_TOL: f64 = 1e-9;
pub const QV_TOL: f64 = 0.10;
pub const SEMIGROUP_TOL: f64 = 1e-14;
pub const ORTHONORMAL_TOL: f64 = 1e-10;
pub const QUADRATURE_TOL: f64 = 1e-10;
/// The halving check and the Lyapunov comparison use modes `j, k <= 4`.
pub const OU_COMPARED_MODES: usize = 4;
pub const OU_BATCHES: usize = 100;

pub fn run(cfg: &Resolved) -> Result<Report, CliError> {
    match cfg.subcommand {
        Command::Exact => exact(cfg),
        Command::ExactSweep => exact_sweep(cfg),
        Command::StationaryCov => stationary_cov(cfg),
        Command::Relax => relax(cfg),
        Command::Green => green(cfg),
        Command::Heat => heat(cfg),
        Command::Ou => ou(cfg),
        Command::Bounds => bounds(cfg),
        Command::Martingale => martingale(cfg),
        Command::Spectral => spectral(cfg),
    }
}

fn params(cfg: &Resolved) -> Result<BoundaryParams, CliError> {
    BoundaryParams::new(cfg.alpha, cfg.beta).map_err(|e| CliError::Config(e.to_string()))
}

fn quadratic_profile(n: usize, bp: &BoundaryParams) -> Result<Profile1D, CliError> {
    let (a, b) = (bp.alpha(), bp.beta());
    Ok(Profile1D::from_fn(n, bp, |u| a + (b - a) * u * u)?)
}

pub fn exact(cfg: &Resolved) -> Result<Report, CliError> {
    let bp = params(cfg)?;
    let g = build_generator_dense(cfg.n, &bp)?;
    let sd = stationary_distribution(&g)?;
    let perr = exact_profile(&sd).sup_distance(&Profile1D::linear(cfg.n, &bp));
    let tp = exact_two_point(&sd);
    let fit = fit_sign(&tp, &bp);
    let sigma = fit.sigma.map_or("undetermined".to_string(), |s| format!("{s:+}"));
    Ok(Report {
        outcomes: vec![
            CriterionOutcome::new(
                "exact profile is linear",
                Numerical,
                perr <= PROFILE_TOL,
                format!("max deviation {perr:.3e} (tol {PROFILE_TOL:e})"),
            )
            .metric("max_error", perr),
            CriterionOutcome::new(
                "exact two-point function",
                Numerical,
                fit.max_error <= TWO_POINT_TOL,
                format!("sign {sigma}, max deviation {:.3e} (tol {TWO_POINT_TOL:e})", fit.max_error),
            )
            .metric("max_error", fit.max_error)
            .metric("sigma", fit.sigma.unwrap_or(0.0)),
        ],
        tables: vec![
            Table::new("distribution", |w| sd.write_csv(w))?,
            Table::new("two_point", |w| io::write_triangle(w, &tp))?,
        ],
    })
}

pub const SWEEP_DENSITIES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

pub fn exact_sweep(cfg: &Resolved) -> Result<Report, CliError> {
    let mut rows = Vec::new();
    let (mut worst_profile, mut worst_tp) = (0.0f64, 0.0f64);
    let mut signs: Vec<f64> = Vec::new();
    for n in 2..=cfg.n {
        for &a in &SWEEP_DENSITIES {
            for &b in &SWEEP_DENSITIES {
                let bp = BoundaryParams::new(a, b).expect("grid values lie in [0, 1]");
                let sd = stationary_distribution(&build_generator_dense(n, &bp)?)?;
                let perr = exact_profile(&sd).sup_distance(&Profile1D::linear(n, &bp));
                let fit = fit_sign(&exact_two_point(&sd), &bp);
                worst_profile = worst_profile.max(perr);
                worst_tp = worst_tp.max(fit.max_error);
                if let Some(s) = fit.sigma {
                    if !signs.contains(&s) {
                        signs.push(s);
                    }
                }
                rows.push((n, a, b, perr, fit.max_error, fit.sigma.unwrap_or(0.0)));
            }
        }
    }
    let table = Table::new("sweep", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["n", "alpha", "beta", "profile_error", "two_point_error", "sigma"])?;
        for (n, a, b, pe, te, s) in &rows {
            c.write_record([n.to_string(), io::fmt_f64(*a), io::fmt_f64(*b), io::fmt_f64(*pe), io::fmt_f64(*te), s.to_string()])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let single = signs.len() == 1;
    Ok(Report {
        outcomes: vec![
            CriterionOutcome::new(
                "exact profiles are linear",
                Numerical,
                worst_profile <= PROFILE_TOL,
                format!("worst deviation {worst_profile:.3e} over {} cases (tol {PROFILE_TOL:e})", rows.len()),
            )
            .metric("max_error", worst_profile),
            CriterionOutcome::new(
                "exact two-point functions",
                Numerical,
                worst_tp <= TWO_POINT_TOL,
                format!("worst deviation {worst_tp:.3e} (tol {TWO_POINT_TOL:e})"),
            )
            .metric("max_error", worst_tp),
            CriterionOutcome::new(
                "single global sign",
                Numerical,
                single,
                format!("signs seen: {signs:?}"),
            )
            .metric("sigma", if single { signs[0] } else { 0.0 }),
        ],
        tables: vec![table],
    })
}

pub fn stationary_cov(cfg: &Resolved) -> Result<Report, CliError> {
    let bp = params(cfg)?;
    let mut spec = EnsembleSpec::stationary(cfg.n, bp, cfg.replicas, cfg.seed, cfg.modes);
    spec.burn_in = cfg.burn_in;
    spec.times = cfg.times.clone();
    let res = run_ensemble(&spec)?;
    let reference = stationary_covariance_matrix(cfg.modes, &bp);
    let floor = if bp.is_equilibrium() { 0.0 } else { FINITE_SIZE_FLOOR };
    let mut report = Report::default();
    for (i, samples) in res.fields.iter().enumerate() {
        let t = res.times[i];
        let est = estimate_covariance(samples)?;
        let cmp = est.compare(&reference, cfg.modes, cfg.modes, SIGMAS, floor);
        report.outcomes.push(
            CriterionOutcome::new(
                &format!("stationary covariance at t = {t}"),
                Statistical,
                cmp.passed(),
                format!(
                    "max |z| {:.2}, max deviation {:.4} (tolerance max({SIGMAS} SE, {floor}))",
                    cmp.max_abs_z(),
                    cmp.max_abs_deviation()
                ),
            )
            .metric("max_abs_z", cmp.max_abs_z())
            .metric("max_abs_deviation", cmp.max_abs_deviation()),
        );
        let g = gaussianity_check(samples)?;
        report.outcomes.push(
            CriterionOutcome::new(
                &format!("gaussianity at t = {t}"),
                Statistical,
                !g.any_flagged(),
                format!("max |z| of skewness and kurtosis {:.2} (threshold {GAUSSIANITY_THRESHOLD})", g.max_abs_z()),
            )
            .metric("max_abs_z", g.max_abs_z()),
        );
        let suffix = if res.times.len() > 1 { format!("_{i}") } else { String::new() };
        report.tables.push(Table::new(&format!("covariance{suffix}"), |w| io::write_covariance_report(w, &cmp))?);
    }
    report.tables.push(Table::new("fields", |w| io::write_field_samples(w, &res.fields))?);
    Ok(report)
}

pub fn relax(cfg: &Resolved) -> Result<Report, CliError> {
    let bp = params(cfg)?;
    let start = quadratic_profile(cfg.n, &bp)?;
    let spec = EnsembleSpec::product(start.clone(), bp, cfg.replicas, cfg.times.clone(), cfg.seed, cfg.modes);
    let res = run_ensemble(&spec)?;
    let cp = ContinuumProfile::quadratic(&bp, J_HEAT);
    let mut report = Report::default();
    for (i, samples) in res.fields.iter().enumerate() {
        let t = res.times[i];
        let reference = dynamic_covariance_matrix(t, t, cfg.modes, &cp)?;
        let cmp = estimate_covariance(samples)?.compare(&reference, cfg.modes, cfg.modes, SIGMAS, FINITE_SIZE_FLOOR);
        report.outcomes.push(
            CriterionOutcome::new(
                &format!("covariance at t = {t}"),
                Statistical,
                cmp.passed(),
                format!(
                    "max |z| {:.2}, max deviation {:.4} (tolerance max({SIGMAS} SE, {FINITE_SIZE_FLOOR}))",
                    cmp.max_abs_z(),
                    cmp.max_abs_deviation()
                ),
            )
            .metric("max_abs_z", cmp.max_abs_z())
            .metric("max_abs_deviation", cmp.max_abs_deviation()),
        );
        let heat = solve_heat_1d(&start, t)?;
        let z = res.density[i].max_abs_z(&heat);
        report.outcomes.push(
            CriterionOutcome::new(
                &format!("mean profile at t = {t}"),
                Statistical,
                z < SIGMAS,
                format!("max |z| over sites {z:.2}"),
            )
            .metric("max_abs_z", z),
        );
        report.tables.push(Table::new(&format!("covariance_{i}"), |w| io::write_covariance_report(w, &cmp))?);
        report.tables.push(Table::new(&format!("profile_{i}"), |w| io::write_profile(w, &heat))?);
    }
    report.tables.push(Table::new("fields", |w| io::write_field_samples(w, &res.fields))?);
    Ok(report)
}

/// Sizes `8, 16, 32, ...` up to `n`, plus `n` itself.
fn green_sizes(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = std::iter::successors(Some(8usize), |m| Some(m * 2)).take_while(|&m| m <= n).collect();
    if v.last() != Some(&n) {
        v.push(n);
    }
    v
}

/// The source strength is `c = (beta - alpha)^2`.
pub fn green(cfg: &Resolved) -> Result<Report, CliError> {
    let c = (cfg.beta - cfg.alpha).powi(2);
    let mut report = Report::default();
    let mut last = None;
    for n in green_sizes(cfg.n) {
        let phi = solve_green_triangle(n, c)?;
        let err = phi.sup_distance(&green_closed_form(n, c));
        let bound = c / (4.0 * (n as f64 - 1.0));
        let max = phi.max_value();
        report.outcomes.push(
            CriterionOutcome::new(
                &format!("green solve matches closed form, N = {n}"),
                Numerical,
                err <= GREEN_TOL,
                format!("max deviation {err:.3e} (tol {GREEN_TOL:e})"),
            )
            .metric("max_error", err),
        );
        report.outcomes.push(
            CriterionOutcome::new(
                &format!("green maximum bound, N = {n}"),
                Numerical,
                max <= bound,
                format!("max {max:.6e} <= c / (4 (N - 1)) = {bound:.6e}"),
            )
            .metric("max", max)
            .metric("bound", bound),
        );
        last = Some(phi);
    }
    if let Some(phi) = last {
        report.tables.push(Table::new("green", |w| io::write_triangle(w, &phi))?);
    }
    Ok(report)
}

/// Heat flow of the quadratic profile `alpha + (beta - alpha) u^2`.
pub fn heat(cfg: &Resolved) -> Result<Report, CliError> {
    let bp = params(cfg)?;
    let p0 = quadratic_profile(cfg.n, &bp)?;
    let mut report = Report::default();
    let mut worst: f64 = 0.0;
    for (i, &t) in cfg.times.iter().enumerate() {
        let full = solve_heat_1d(&p0, t)?;
        let half = solve_heat_1d(&solve_heat_1d(&p0, 0.5 * t)?, 0.5 * t)?;
        worst = worst.max(full.sup_distance(&half));
        report.tables.push(Table::new(&format!("profile_{i}"), |w| io::write_profile(w, &full))?);
    }
    report.outcomes.push(
        CriterionOutcome::new("heat semigroup property", Numerical, worst <= 1e-10, format!("max deviation {worst:.3e}"))
            .metric("max_error", worst),
    );
    let g = gradient_maxprinciple_check(&p0, &cfg.times);
    report.outcomes.push(match g {
        Ok(r) => CriterionOutcome::new(
            "gradient maximum principle",
            Numerical,
            true,
            format!("max gradient {:.6} <= initial {:.6}", r.observed_max, r.initial_max),
        ),
        Err(e) => CriterionOutcome::new("gradient maximum principle", Numerical, false, e.to_string()),
    });
    Ok(report)
}

pub fn ou(cfg: &Resolved) -> Result<Report, CliError> {
    let bp = params(cfg)?;
    let j = cfg.modes;
    let t_end = *cfg.times.last().expect("validated");
    let dt = if cfg.dt > 0.0 { cfg.dt.min(max_stable_dt(j)) } else { max_stable_dt(j) };
    let mut report = Report::default();

    let b = noise_covariance(j, &ContinuumProfile::stationary(&bp), 0.0)?;
    let psd = b.check_psd();
    report.outcomes.push(CriterionOutcome::new(
        "noise covariance is positive semidefinite",
        Numerical,
        psd.is_ok(),
        format!("min eigenvalue {:.3e}", b.min_eigenvalue()),
    ));
    let sigma = lyapunov_stationary(&b);
    let residual = lyapunov_residual(&sigma, &b);
    let mut lyap_err: f64 = 0.0;
    for a in 1..=j {
        for c in 1..=j {
            lyap_err = lyap_err.max((sigma[(a - 1) * j + c - 1] - stationary_covariance(a, c, &bp)).abs());
        }
    }
    report.outcomes.push(
        CriterionOutcome::new(
            "lyapunov solution matches stationary covariance",
            Numerical,
            lyap_err <= LYAPUNOV_TOL && residual <= LYAPUNOV_RESIDUAL_TOL,
            format!("max deviation {lyap_err:.3e} (tol {LYAPUNOV_TOL:e}), residual {residual:.3e}"),
        )
        .metric("max_error", lyap_err)
        .metric("residual", residual),
    );
    psd?;

    // Closed-form B for the runs: same matrix, no quadrature noise.
    let b = stationary_noise_covariance(j, &bp);
    let coarse = ou_long_run_covariance(&b, dt, t_end, cfg.burn_in, OU_BATCHES, cfg.seed, Stepper::EulerMaruyama)?;
    let used = OU_COMPARED_MODES.min(j);
    let cmp = coarse.compare(&sigma, used, used, SIGMAS, 0.0);
    report.outcomes.push(
        CriterionOutcome::new(
            "euler-maruyama covariance matches lyapunov",
            Statistical,
            cmp.passed(),
            format!("max |z| {:.2} over j, k <= {used}", cmp.max_abs_z()),
        )
        .metric("max_abs_z", cmp.max_abs_z()),
    );

    let fine_seed = keyed_stream(cfg.seed, 1, 0).random::<u64>();
    let fine = ou_long_run_covariance(&b, 0.5 * dt, t_end, cfg.burn_in, OU_BATCHES, fine_seed, Stepper::EulerMaruyama)?;
    let target = sigma[(j - 1) * j + j - 1];
    let (b1, se1) = (coarse.get(j, j) - target, coarse.se(j, j));
    let (b2, se2) = (fine.get(j, j) - target, fine.se(j, j));
    let resolved = b1 > SIGMAS * se1;
    let combined = (se1 * se1 + 4.0 * se2 * se2).sqrt();
    let halves = (b1 - 2.0 * b2).abs() <= SIGMAS * combined;
    report.outcomes.push(
        CriterionOutcome::new(
            &format!("bias halves with dt (mode {j})"),
            Statistical,
            resolved && halves,
            format!(
                "bias {b1:.3e} +- {se1:.1e} at dt = {dt:.3e}, {b2:.3e} +- {se2:.1e} at dt / 2; |b1 - 2 b2| = {:.2} SE",
                (b1 - 2.0 * b2).abs() / combined
            ),
        )
        .metric("bias_dt", b1)
        .metric("bias_half_dt", b2)
        .metric("halving_z", (b1 - 2.0 * b2).abs() / combined),
    );
    report.tables.push(Table::new("covariance", |w| io::write_covariance_report(w, &cmp))?);
    report.tables.push(Table::new("lyapunov", |w| io::write_covariance_matrix(w, j, &sigma))?);

    let path = simulate_ou(&OuSpec {
        modes: j,
        dt,
        t_end: t_end.min(1.0),
        seed: cfg.seed,
        noise: NoiseSource::Fixed(b),
        stepper: Stepper::EulerMaruyama,
        initial: None,
        record_every: ((t_end.min(1.0) / dt / 1000.0).round() as usize).max(1),
    })?;
    report.tables.push(Table::new("trajectory", |w| io::write_trajectory(w, &path))?);
    Ok(report)
}

fn random_profile(n: usize, rng: &mut RandomStream) -> Result<Profile1D, PdeError> {
    let bp = BoundaryParams::new(rng.random(), rng.random()).expect("unit interval");
    let interior: Vec<f64> = (1..n).map(|_| rng.random()).collect();
    Profile1D::from_interior(n, &bp, &interior)
}

fn random_field(n: usize, scale: f64, rng: &mut RandomStream) -> TriangleField {
    let len = TriangleField::zeros(n).len();
    let values = (0..len).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
    TriangleField::from_values(n, values).expect("length matches")
}

struct Suite {
    name: &'static str,
    cases: usize,
    failures: usize,
    /// Smallest `bound - value` seen.
    margin: f64,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: 0, margin: f64::INFINITY }
    }

    fn record(&mut self, value: f64, bound: f64) {
        self.cases += 1;
        let m = bound - value;
        self.margin = self.margin.min(m);
        if m < -BOUND_TOL {
            self.failures += 1;
        }
    }

    fn fail(&mut self) {
        self.cases += 1;
        self.failures += 1;
    }

    fn outcome(&self) -> CriterionOutcome {
        CriterionOutcome::new(
            self.name,
            Numerical,
            self.failures == 0,
            format!("{} cases, {} failures, smallest margin {:.3e}", self.cases, self.failures, self.margin),
        )
        .metric("cases", self.cases as f64)
        .metric("failures", self.failures as f64)
        .metric("margin", self.margin)
    }
}

/// Randomized maximum-principle suites (`replicas` cases each) and the
/// correlation bound at the sizes `16, 32, ...` up to `n`.
pub fn bounds(cfg: &Resolved) -> Result<Report, CliError> {
    let cases = cfg.replicas;
    let tau = *cfg.times.last().expect("validated");
    let mut rng = keyed_stream(cfg.seed, 7, 0);

    let mut gradient = Suite::new("gradient maximum principle");
    for _ in 0..cases {
        let n = rng.random_range(3..=40);
        let p0 = random_profile(n, &mut rng)?;
        let times: Vec<f64> = {
            let mut t: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 0.5).collect();
            t.sort_by(f64::total_cmp);
            t
        };
        match gradient_maxprinciple_check(&p0, &times) {
            Ok(r) => gradient.record(r.observed_max, r.initial_max),
            Err(_) => gradient.fail(),
        }
    }

    let mut maximum = Suite::new("triangle maximum principle");
    for _ in 0..cases {
        let n = rng.random_range(4..=24);
        let h = random_field(n, 1.0, &mut rng);
        let t = tau * (0.1 + rng.random::<f64>());
        let run = solve_parabolic_triangle(&h, |_| DiagonalSource::constant(n, 0.0), t, &ParabolicOptions::implicit_euler(100))?;
        // The absorbing boundary holds the value 0.
        maximum.record(run.max_value, h.max_value().max(0.0));
    }

    let mut source = Suite::new("diagonal source bound");
    for _ in 0..cases {
        let n = rng.random_range(4..=24);
        let h = random_field(n, rng.random(), &mut rng);
        let amp: Vec<f64> = (0..n - 2).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let freq: f64 = rng.random_range(0.0..20.0);
        let g = |t: f64| DiagonalSource::new(n, amp.iter().map(|a| a * (freq * t).cos()).collect()).expect("length");
        let sup_g = amp.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let run = solve_parabolic_triangle(&h, g, tau, &ParabolicOptions::implicit_euler(100))?;
        source.record(run.sup_norm, h.sup_norm() + sup_g / (4.0 * (n as f64 - 1.0)));
    }

    let mut green_bound = Suite::new("green maximum bound");
    for _ in 0..cases {
        let n = rng.random_range(3..=64);
        let c: f64 = rng.random_range(-2.0..2.0);
        let phi = solve_green_triangle(n, c)?;
        green_bound.record(phi.sup_norm(), c.abs() / (4.0 * (n as f64 - 1.0)));
    }

    let mut report = Report::default();
    for s in [&gradient, &maximum, &source, &green_bound] {
        report.outcomes.push(s.outcome());
    }

    let mut rows = Vec::new();
    for n in std::iter::successors(Some(16usize), |m| Some(m * 2)).take_while(|&m| m <= cfg.n) {
        let mut suite = Suite::new("correlation bound");
        for case in 0..5 {
            let p0 = if case == 0 {
                // Linear profile with no initial correlations.
                Profile1D::linear(n, &BoundaryParams::new(cfg.alpha, cfg.beta).map_err(|e| CliError::Config(e.to_string()))?)
            } else {
                let bp = BoundaryParams::new(rng.random(), rng.random()).expect("unit interval");
                let k = rng.random_range(1..=3) as f64;
                let a: f64 = rng.random_range(-0.2..0.2);
                Profile1D::from_fn(n, &bp, |u| {
                    (bp.alpha() + (bp.beta() - bp.alpha()) * u + a * (k * std::f64::consts::PI * u).sin()).clamp(0.0, 1.0)
                })?
            };
            let h = if case == 0 { TriangleField::zeros(n) } else { random_field(n, rng.random::<f64>() / n as f64, &mut rng) };
            match correlation_evolution(&h, &p0, tau, &ParabolicOptions::implicit_euler(200)) {
                Ok(r) => {
                    suite.record(r.run.sup_norm, r.bound);
                    rows.push((n, case, r.run.sup_norm, r.bound));
                }
                Err(PdeError::CorrelationBound { sup, bound }) => {
                    suite.record(sup, bound);
                    rows.push((n, case, sup, bound));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let mut o = suite.outcome();
        o.name = format!("correlation bound, N = {n}");
        report.outcomes.push(o);
    }
    report.tables.push(Table::new("correlation_bound", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["n", "case", "sup_norm", "bound"])?;
        for (n, case, s, b) in &rows {
            c.write_record([n.to_string(), case.to_string(), io::fmt_f64(*s), io::fmt_f64(*b)])?;
        }
        c.flush()?;
        Ok(())
    })?);
    Ok(report)
}

/// Number of recording intervals on `[0, t]`.
pub const MARTINGALE_GRID: usize = 50;

/// Modes `1..=modes`, started from the product measure of the linear profile.
pub fn martingale(cfg: &Resolved) -> Result<Report, CliError> {
    let bp = params(cfg)?;
    let t_end = *cfg.times.last().expect("validated");
    let profile = Profile1D::linear(cfg.n, &bp);
    let mut report = Report::default();
    let mut rows = Vec::new();
    for mode in 1..=cfg.modes {
        let seed = keyed_stream(cfg.seed, 100 + mode as u64, 0).random::<u64>();
        let paths = run_martingale_ensemble(&profile, bp, mode, t_end, t_end / MARTINGALE_GRID as f64, cfg.replicas, seed)?;
        let d = martingale_diagnostic(&paths)?;
        let z = d.max_increment_z();
        report.outcomes.push(
            CriterionOutcome::new(
                &format!("martingale increments have mean zero, mode {mode}"),
                Statistical,
                z < SIGMAS,
                format!("max |z| {z:.2} over {MARTINGALE_GRID} increments and the endpoint"),
            )
            .metric("max_abs_z", z),
        );
        report.outcomes.push(
            CriterionOutcome::new(
                &format!("quadratic variation ratio, mode {mode}"),
                Statistical,
                (d.qv_ratio - 1.0).abs() <= QV_TOL,
                format!(
                    "realized / predicted {:.4}; E[M^2] / E[int Gamma] {:.3} +- {:.3}",
                    d.qv_ratio, d.second_moment_ratio, d.second_moment_ratio_se
                ),
            )
            .metric("qv_ratio", d.qv_ratio)
            .metric("second_moment_ratio", d.second_moment_ratio)
            .metric("boundary_share", d.boundary_share),
        );
        rows.push((mode, z, d.qv_ratio, d.second_moment_ratio, d.second_moment_ratio_se));
    }
    report.tables.push(Table::new("martingale", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["j", "max_increment_z", "qv_ratio", "second_moment_ratio", "second_moment_ratio_se"])?;
        for (j, z, q, m, s) in &rows {
            c.write_record([j.to_string(), io::fmt_f64(*z), io::fmt_f64(*q), io::fmt_f64(*m), io::fmt_f64(*s)])?;
        }
        c.flush()?;
        Ok(())
    })?);
    Ok(report)
}

pub fn spectral(cfg: &Resolved) -> Result<Report, CliError> {
    let bp = params(cfg)?;
    let j = cfg.modes;
    let mut rng = keyed_stream(cfg.seed, 9, 0);
    let mut report = Report::default();

    let mut semigroup: f64 = 0.0;
    for _ in 0..20 {
        let v = ModeVector::new((0..j).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect());
        for w in cfg.times.windows(2).chain(std::iter::once(&[0.01, 0.02][..])) {
            let (s, t) = (w[0], w[1]);
            let two = semigroup_apply(t, &semigroup_apply(s, &v));
            let one = semigroup_apply(s + t, &v);
            for (a, b) in two.coeffs().iter().zip(one.coeffs()) {
                semigroup = semigroup.max((a - b).abs());
            }
        }
    }
    report.outcomes.push(
        CriterionOutcome::new(
            "semigroup property",
            Numerical,
            semigroup <= SEMIGROUP_TOL,
            format!("max deviation {semigroup:.3e} (tol {SEMIGROUP_TOL:e})"),
        )
        .metric("max_error", semigroup),
    );

    let gram = SineBasis::new(j).gram_matrix();
    let mut ortho: f64 = 0.0;
    for a in 0..j {
        for c in 0..j {
            ortho = ortho.max((gram[a * j + c] - if a == c { 1.0 } else { 0.0 }).abs());
        }
    }
    report.outcomes.push(
        CriterionOutcome::new(
            "orthonormality",
            Numerical,
            ortho <= ORTHONORMAL_TOL,
            format!("max deviation {ortho:.3e} (tol {ORTHONORMAL_TOL:e})"),
        )
        .metric("max_error", ortho),
    );

    let exact = (1..=j).all(|n| {
        let w = inverse_laplacian(&ModeVector::unit(j, n));
        (1..=j).all(|m| w.get(m) == if m == n { 1.0 / eigenvalue(n) } else { 0.0 })
    });
    report.outcomes.push(CriterionOutcome::new(
        "inverse laplacian",
        Numerical,
        exact,
        "(-Laplacian)^-1 e_n = e_n / (n pi)^2 compared with ==".into(),
    ));

    let mut quad: f64 = 0.0;
    for a in 1..=j {
        for c in 1..=j {
            quad = quad.max((stationary_covariance(a, c, &bp) - stationary_covariance_quadrature(a, c, &bp)).abs());
        }
    }
    report.outcomes.push(
        CriterionOutcome::new(
            "stationary covariance closed form vs quadrature",
            Numerical,
            quad <= QUADRATURE_TOL,
            format!("max deviation {quad:.3e} (tol {QUADRATURE_TOL:e})"),
        )
        .metric("max_error", quad),
    );
    let matrix = stationary_covariance_matrix(j, &bp);
    report.tables.push(Table::new("stationary_covariance", |w| io::write_covariance_matrix(w, j, &matrix))?);
    Ok(report)
}
