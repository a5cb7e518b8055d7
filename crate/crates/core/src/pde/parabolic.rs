//! `d/ds phi = Delta_V^N phi + g_s` on the triangle with absorbing boundary.

use super::{DiagonalSource, HeatFlow, PdeError, Profile1D, TriangleField, TriangleOperator};

/// Implicit time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    /// First order; its update is a nonnegative contraction, so the discrete
    /// maximum principle and the diagonal-source bound hold step by step.
    ImplicitEuler,
    /// Second-order, L-stable TR-BDF2. Both stages share one matrix.
    TrBdf2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicOptions {
    pub scheme: TimeScheme,
    pub initial_steps: usize,
    /// Halve the step until two successive solutions differ by less than
    /// this in sup norm. `None` runs `initial_steps` once.
    pub refine_tol: Option<f64>,
    pub max_halvings: usize,
    pub cg_tol: f64,
}

impl Default for ParabolicOptions {
    fn default() -> Self {
        Self {
            scheme: TimeScheme::TrBdf2,
            initial_steps: 1000,
            refine_tol: Some(1e-8),
            max_halvings: 8,
            cg_tol: 1e-12,
        }
    }
}

impl ParabolicOptions {
    /// A single implicit Euler pass with `steps` steps.
    pub fn implicit_euler(steps: usize) -> Self {
        Self { scheme: TimeScheme::ImplicitEuler, initial_steps: steps, refine_tol: None, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicRun {
    pub field: TriangleField,
    pub steps: usize,
    /// Largest `|phi|` seen at any step (initial data included).
    pub sup_norm: f64,
    /// Largest value of `phi` on `V` at any step.
    pub max_value: f64,
    /// Sup distance between the last two refinement levels.
    pub refinement_diff: Option<f64>,
}

const RESIDUAL_LIMIT: f64 = 1e-10;

fn step_solve(op: &TriangleOperator, shift: f64, rhs: &[f64], u: &mut [f64], tol: f64) -> Result<(), PdeError> {
    match op.solve_shifted(shift, rhs, u, tol) {
        Ok(r) if r <= RESIDUAL_LIMIT => Ok(()),
        Ok(r) => Err(PdeError::StepRejected { residual: r }),
        Err(PdeError::NotConverged { residual, .. }) => Err(PdeError::StepRejected { residual }),
        Err(e) => Err(e),
    }
}

fn integrate<G>(
    op: &TriangleOperator,
    h: &TriangleField,
    source: &G,
    tau: f64,
    steps: usize,
    opts: &ParabolicOptions,
) -> Result<ParabolicRun, PdeError>
where
    G: Fn(f64) -> DiagonalSource,
{
    let n = h.size();
    let len = h.len();
    let dt = tau / steps as f64;
    let mut u = h.values().to_vec();
    let mut sup_norm = h.sup_norm();
    let mut max_value = h.max_value();
    // Superdiagonal entries sit at the start of each x-row.
    let diag_index: Vec<usize> = {
        let proto = TriangleField::zeros(n);
        proto.iter().enumerate().filter(|(_, (x, y, _))| *y == x + 1).map(|(k, _)| k).collect()
    };
    let add_source = |rhs: &mut [f64], g: &DiagonalSource, w: f64| {
        for (i, &k) in diag_index.iter().enumerate() {
            rhs[k] += w * g.values()[i];
        }
    };
    let mut rhs = vec![0.0; len];
    let mut au = vec![0.0; len];
    let mut next = vec![0.0; len];
    let mut g_now = source(0.0);
    match opts.scheme {
        TimeScheme::ImplicitEuler => {
            for s in 1..=steps {
                let t = s as f64 * dt;
                let g_next = source(t);
                rhs.copy_from_slice(&u);
                add_source(&mut rhs, &g_next, dt);
                rhs.iter_mut().for_each(|v| *v /= dt);
                next.copy_from_slice(&u);
                step_solve(op, 1.0 / dt, &rhs, &mut next, opts.cg_tol)?;
                std::mem::swap(&mut u, &mut next);
                for &v in &u {
                    sup_norm = sup_norm.max(v.abs());
                    max_value = max_value.max(v);
                }
            }
        }
        TimeScheme::TrBdf2 => {
            let gamma = 2.0 - std::f64::consts::SQRT_2;
            let d = 0.5 * gamma * dt;
            let c1 = 1.0 / (gamma * (2.0 - gamma));
            let c2 = (1.0 - gamma).powi(2) / (gamma * (2.0 - gamma));
            let mut stage = vec![0.0; len];
            for s in 0..steps {
                let t = s as f64 * dt;
                let g_mid = source(t + gamma * dt);
                let g_end = source(t + dt);
                // trapezoidal stage to t + gamma dt
                op.apply(&u, &mut au);
                for i in 0..len {
                    rhs[i] = u[i] + d * au[i];
                }
                add_source(&mut rhs, &g_now, d);
                add_source(&mut rhs, &g_mid, d);
                rhs.iter_mut().for_each(|v| *v /= d);
                stage.copy_from_slice(&u);
                step_solve(op, 1.0 / d, &rhs, &mut stage, opts.cg_tol)?;
                // BDF2 stage to t + dt
                for i in 0..len {
                    rhs[i] = c1 * stage[i] - c2 * u[i];
                }
                add_source(&mut rhs, &g_end, d);
                rhs.iter_mut().for_each(|v| *v /= d);
                next.copy_from_slice(&stage);
                step_solve(op, 1.0 / d, &rhs, &mut next, opts.cg_tol)?;
                std::mem::swap(&mut u, &mut next);
                g_now = g_end;
                for &v in &u {
                    sup_norm = sup_norm.max(v.abs());
                    max_value = max_value.max(v);
                }
            }
        }
    }
    Ok(ParabolicRun {
        field: TriangleField::from_values(n, u)?,
        steps,
        sup_norm,
        max_value,
        refinement_diff: None,
    })
}

/// Integrates `d/ds phi = Delta_V^N phi + g_s`, `phi_0 = h`, up to `tau`.
///
/// `source(t)` gives `g_t` on the superdiagonal.
pub fn solve_parabolic_triangle<G>(
    h: &TriangleField,
    source: G,
    tau: f64,
    opts: &ParabolicOptions,
) -> Result<ParabolicRun, PdeError>
where
    G: Fn(f64) -> DiagonalSource,
{
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(PdeError::InvalidArgument(format!("tau must be finite and >= 0, got {tau}")));
    }
    if opts.initial_steps == 0 {
        return Err(PdeError::InvalidArgument("initial_steps must be positive".into()));
    }
    let n = h.size();
    if n < 3 || tau == 0.0 {
        return Ok(ParabolicRun {
            field: h.clone(),
            steps: 0,
            sup_norm: h.sup_norm(),
            max_value: h.max_value(),
            refinement_diff: None,
        });
    }
    let op = TriangleOperator::new(n);
    let mut steps = opts.initial_steps;
    let mut coarse = integrate(&op, h, &source, tau, steps, opts)?;
    let Some(tol) = opts.refine_tol else {
        return Ok(coarse);
    };
    let mut last_diff = f64::INFINITY;
    for _ in 0..opts.max_halvings {
        steps *= 2;
        let mut fine = integrate(&op, h, &source, tau, steps, opts)?;
        last_diff = fine.field.sup_distance(&coarse.field);
        fine.refinement_diff = Some(last_diff);
        if last_diff < tol {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(PdeError::RefinementFailed { steps, diff: last_diff })
}

/// Two-point correlation dynamics started from correlations `h` and mean
/// profile `p0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRun {
    pub run: ParabolicRun,
    /// Constant of the initial-data assumption: the larger of
    /// `max_x |grad_N p0(x)|` and `N max |h|`.
    pub c0: f64,
    /// `(2 C0 + C0^2) / (2N)`.
    pub bound: f64,
}

const BOUND_TOLERANCE: f64 = 1e-9;

/// The source is `g_t(x, x+1) = -(grad_N rho_t)(x)^2`, with `rho_t` the
/// semidiscrete heat flow of `p0`. Fails if the sup norm ever exceeds
/// `(2 C0 + C0^2) / (2N)`.
pub fn correlation_evolution(
    h: &TriangleField,
    p0: &Profile1D,
    tau: f64,
    opts: &ParabolicOptions,
) -> Result<CorrelationRun, PdeError> {
    let n = h.size();
    if p0.size() != n {
        return Err(PdeError::InvalidArgument(format!(
            "profile has N = {}, field has N = {n}",
            p0.size()
        )));
    }
    let flow = HeatFlow::new(p0);
    let source = |t: f64| {
        let grad = flow.profile_at(t).gradient();
        // bonds (x, x+1) for x = 1..N-2
        let vals = grad[1..n - 1].iter().map(|g| -g * g).collect();
        DiagonalSource::new(n, vals).expect("source length")
    };
    let run = solve_parabolic_triangle(h, source, tau, opts)?;
    let nf = n as f64;
    let c0 = p0.max_abs_gradient().max(nf * h.sup_norm());
    let bound = (2.0 * c0 + c0 * c0) / (2.0 * nf);
    if run.sup_norm > bound + BOUND_TOLERANCE {
        return Err(PdeError::CorrelationBound { sup: run.sup_norm, bound });
    }
    Ok(CorrelationRun { run, c0, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{green_closed_form, solve_green_triangle};
    use crate::process::BoundaryParams;

    #[test]
    fn zero_data_stays_zero() {
        let h = TriangleField::zeros(10);
        let r = solve_parabolic_triangle(&h, |_| DiagonalSource::constant(10, 0.0), 0.3, &ParabolicOptions::default())
            .unwrap();
        assert_eq!(r.field.sup_norm(), 0.0);
    }

    #[test]
    fn constant_source_relaxes_to_green_field() {
        let n = 12;
        let h = TriangleField::zeros(n);
        let r = solve_parabolic_triangle(&h, |_| DiagonalSource::constant(n, 1.0), 3.0, &ParabolicOptions::default())
            .unwrap();
        let g = solve_green_triangle(n, 1.0).unwrap();
        assert!(r.field.sup_distance(&g) < 1e-6);
        assert!(r.field.sup_distance(&green_closed_form(n, 1.0)) < 1e-6);
    }

    #[test]
    fn both_schemes_agree_and_refinement_converges() {
        let n = 9;
        let h = TriangleField::from_fn(n, |x, y| ((x * 7 + y * 3) % 5) as f64 * 0.01);
        let src = |t: f64| DiagonalSource::constant(n, -0.3 * (1.0 + t));
        let a = solve_parabolic_triangle(&h, src, 0.05, &ParabolicOptions::default()).unwrap();
        assert!(a.refinement_diff.unwrap() < 1e-8);
        let b = solve_parabolic_triangle(&h, src, 0.05, &ParabolicOptions::implicit_euler(40_000)).unwrap();
        assert!(a.field.sup_distance(&b.field) < 1e-6);
    }

    #[test]
    fn flat_profile_without_correlations_is_inert() {
        let n = 14;
        let bp = BoundaryParams::new(0.4, 0.4).unwrap();
        let p0 = Profile1D::linear(n, &bp);
        let r = correlation_evolution(&TriangleField::zeros(n), &p0, 0.5, &ParabolicOptions::default()).unwrap();
        assert_eq!(r.run.field.sup_norm(), 0.0);
    }

    #[test]
    fn stationary_correlations_are_fixed() {
        let n = 10;
        let bp = BoundaryParams::new(0.0, 1.0).unwrap();
        let h = green_closed_form(n, -1.0);
        let p0 = Profile1D::linear(n, &bp);
        let r = correlation_evolution(&h, &p0, 0.7, &ParabolicOptions::default()).unwrap();
        assert!(r.run.field.sup_distance(&h) < 1e-8);
    }
}
