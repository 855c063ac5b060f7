//! The two-phase active-set Newton scheme.
//!
//! Phase 1 iterates the forward-backward (projection) map
//! `u <- (I + (1/a) Psi)^{-1}(u - (1/a) F(u))` and watches the active set
//! of the projected iterates; once the set is stable and strictly
//! complementary, the equation is reduced to the active manifold `M`.
//!
//! Phase 2 solves `0 in F(u) + N_M(u)` by semi-linearization: solve the
//! linearized equation on the tangent space (a critical point of the
//! Lagrangian restricted to `T_M(u)`), restore the primal iterate to `M`
//! by nearest-point projection, and refresh the multiplier by least
//! squares. Under transversality the iteration contracts quadratically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geneq::{nondegeneracy_check, ConvexSet, GenEqProblem, OperatorPart};
use crate::geometry::Manifold;
use crate::linalg;
use crate::varcalc::{multiplier_from_normal, weighted_hessian};

/// Relative threshold below which a reduced linearized system is treated
/// as singular.
const SINGULAR_TOL: f64 = 1e-10;

/// Strict-complementarity threshold used when declaring identification.
const NONDEGENERACY_TOL: f64 = 1e-8;

/// Consecutive iterations the active set must repeat before Phase 1
/// declares identification.
const STABILITY_WINDOW: usize = 3;

/// Maximum number of Phase 1 resumptions after a safeguarded Newton exit.
const MAX_ROUND_TRIPS: usize = 3;

/// Iteration budget for the inner solve of `semi_linearize_intersection`.
const SEMI_MAX_ITER: usize = 50;

/// Errors below this floor are indistinguishable from round-off and are
/// dropped from order fits when enough points remain.
const ERROR_FLOOR: f64 = 1e-13;

/// Upper edge of the asymptotic window used for order fitting.
const FIT_WINDOW_TOP: f64 = 1e-2;

/// Options for the Newton phase (and iteration budgets generally).
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Stop when `|L(u)| + |h(u)|` drops below this.
    pub tol_residual: f64,
    /// Stop when the restored step shrinks below this.
    pub tol_step: f64,
    pub max_iter: usize,
    /// Allow the two-phase driver to fall back to Phase 1 when the
    /// residual doubles twice in a row.
    pub safeguard: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-12,
            tol_step: 1e-14,
            max_iter: 500,
            safeguard: true,
        }
    }
}

/// Which phase produced an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Identify,
    Newton,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Identify => "identify",
            Phase::Newton => "newton",
        }
    }
}

/// One row of the iteration trace. During Phase 1 `lambda` holds the dual
/// estimate `v_k = a (u_k - y_k) - F(u_k)` (ambient dimension); during
/// Phase 2 it holds the manifold multiplier.
#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub k: usize,
    pub u: DVector<f64>,
    pub lambda: DVector<f64>,
    pub residual: f64,
    pub active_set: Vec<usize>,
    pub dist_to_solution: Option<f64>,
    pub phase: Phase,
}

/// Final status of a solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    TransversalityFail,
    IdentificationStall,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIter => "max-iter",
            SolveStatus::TransversalityFail => "transversality-fail",
            SolveStatus::IdentificationStall => "identification-stall",
        }
    }
}

/// Full result of a run: trace, status, fitted convergence order of the
/// final Newton phase, and the global iteration index at which the solver
/// switched phases.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub history: Vec<IterateRecord>,
    pub status: SolveStatus,
    pub fitted_order: Option<f64>,
    pub switch_iteration: Option<usize>,
}

impl SolverReport {
    pub fn final_u(&self) -> Option<&DVector<f64>> {
        self.history.last().map(|r| &r.u)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.history.last().map(|r| r.residual)
    }
}

/// Intersects the tangent-space approximation of `x_mani` at `x` with
/// `y_mani`: returns the point `y` on `x + span(tangent_basis)` with
/// `h_Y(y) = 0` up to `tol`. The manifold dimensions must be complementary
/// so that the inner system is square. Affine `y_mani` constraints are
/// resolved by a single linear solve; otherwise an inner Newton iteration
/// runs in the tangent coordinates.
pub fn semi_linearize_intersection(
    x_mani: &Manifold,
    y_mani: &Manifold,
    x: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let n = x_mani.ambient_dim();
    if y_mani.ambient_dim() != n {
        return Err(Error::DimensionMismatch {
            what: "second manifold",
            expected: n,
            got: y_mani.ambient_dim(),
        });
    }
    if x_mani.dim() + y_mani.dim() != n {
        return Err(Error::InvalidParameter(format!(
            "manifold dimensions {} + {} do not sum to the ambient dimension {}",
            x_mani.dim(),
            y_mani.dim(),
            n
        )));
    }
    let hx = x_mani.constraint_values(x)?;
    if hx.norm() > tol * (1.0 + x.norm()) {
        return Err(Error::PreconditionViolated(format!(
            "base point is off its manifold: |h(x)| = {:.3e}",
            hx.norm()
        )));
    }
    if y_mani.num_constraints() == 0 {
        return Ok(x.clone());
    }
    let basis = x_mani.tangent_basis(x)?;
    let k = basis.ncols();
    let mut t = DVector::zeros(k);
    let mut residual = f64::INFINITY;
    for _ in 0..SEMI_MAX_ITER {
        let y = x + &basis * &t;
        let hy = y_mani.constraint_values(&y)?;
        residual = hy.amax();
        if residual <= tol {
            return Ok(y);
        }
        let sys = y_mani.constraint_jacobian(&y)? * &basis;
        let (sig_min, sig_max) = linalg::sigma_extremes(&sys);
        if sig_min <= SINGULAR_TOL * sig_max.max(1.0) {
            return Err(Error::SingularLinearization { sigma_min: sig_min });
        }
        let dt = linalg::solve_lu(&sys, &(-hy))
            .ok_or(Error::SingularLinearization { sigma_min: sig_min })?;
        t += dt;
    }
    Err(Error::NoConvergence {
        what: "semi-linearization inner solve",
        max_iter: SEMI_MAX_ITER,
        residual,
    })
}

/// One tangent-space Newton step for `0 in F(u) + N_M(u)` at `(u, lambda)`:
/// with `B` an orthonormal tangent basis, `L = F + J^T lambda` and
/// `DL = DF + sum_i lambda_i hess h_i`, solve
/// `(B^T DL B) t = -B^T L(u)` and set `w = u + B t`. The returned
/// multiplier solves the linearized system `L(u) + DL s + J^T delta = 0`
/// in least squares.
pub fn newton_step_manifold(
    problem: &GenEqProblem,
    m: &Manifold,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let basis = m.tangent_basis(u)?;
    newton_step_manifold_with_basis(problem, m, u, lambda, &basis)
}

/// [`newton_step_manifold`] with an explicit orthonormal tangent basis.
/// The step is invariant under the basis choice.
pub fn newton_step_manifold_with_basis(
    problem: &GenEqProblem,
    m: &Manifold,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    basis: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let jac = m.constraint_jacobian(u)?;
    let lagrangian = problem.f_value(u) + jac.transpose() * lambda;
    let dl = problem.f_jacobian(u) + weighted_hessian(m, u, lambda)?;
    let k = basis.ncols();
    let s = if k == 0 {
        DVector::zeros(u.len())
    } else {
        let reduced = basis.transpose() * &dl * basis;
        let (sig_min, sig_max) = linalg::sigma_extremes(&reduced);
        if sig_min <= SINGULAR_TOL * sig_max.max(1.0) {
            return Err(Error::SingularLinearization { sigma_min: sig_min });
        }
        let rhs = -(basis.transpose() * &lagrangian);
        let t = linalg::solve_lu(&reduced, &rhs)
            .ok_or(Error::SingularLinearization { sigma_min: sig_min })?;
        basis * t
    };
    let w = u + &s;
    let target = -(&lagrangian + &dl * &s);
    let delta = linalg::least_squares(&jac.transpose(), &target);
    Ok((w, lambda + delta))
}

/// Restoration: project the trial point back onto the manifold and refresh
/// the multiplier as the least-squares representation of `-F(u)` in the
/// normal space, which is the nearest element of `F(u) + N_M(u)` to zero.
pub fn restore(
    problem: &GenEqProblem,
    m: &Manifold,
    w: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let u = m.project_default(w)?;
    let neg_f = -problem.f_value(&u);
    let lambda = multiplier_from_normal(m, &u, &neg_f)?.lambda;
    Ok((u, lambda))
}

/// Stopping residual `|L(u)| + |h(u)|`: Lagrangian stationarity plus
/// feasibility.
pub fn phase_residual(
    problem: &GenEqProblem,
    m: &Manifold,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<f64> {
    let jac = m.constraint_jacobian(u)?;
    let lagrangian = problem.f_value(u) + jac.transpose() * lambda;
    let h = m.constraint_values(u)?;
    Ok(lagrangian.norm() + h.norm())
}

enum NewtonExit {
    Converged,
    MaxIter,
    Singular,
    Diverged,
    StepSmall,
}

type NewtonCoreOutcome = (Vec<IterateRecord>, NewtonExit, DVector<f64>, DVector<f64>);

fn make_record(
    problem: &GenEqProblem,
    k: usize,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
    residual: f64,
    active_set: &[usize],
    phase: Phase,
) -> IterateRecord {
    let dist = problem
        .known_solution
        .as_ref()
        .map(|ks| (u - &ks.u).norm());
    IterateRecord {
        k,
        u: u.clone(),
        lambda: lambda.clone(),
        residual,
        active_set: active_set.to_vec(),
        dist_to_solution: dist,
        phase,
    }
}

fn newton_phase_core(
    problem: &GenEqProblem,
    m: &Manifold,
    u0: &DVector<f64>,
    lambda0: &DVector<f64>,
    opts: &NewtonOptions,
    k_offset: usize,
    active: &[usize],
) -> Result<NewtonCoreOutcome> {
    let mut u = u0.clone();
    let mut lambda = lambda0.clone();
    let mut records = Vec::new();
    let mut r = phase_residual(problem, m, &u, &lambda)?;
    records.push(make_record(problem, k_offset, &u, &lambda, r, active, Phase::Newton));
    if r <= opts.tol_residual {
        return Ok((records, NewtonExit::Converged, u, lambda));
    }
    let mut doublings = 0_usize;
    let mut exit = NewtonExit::MaxIter;
    for iter in 1..=opts.max_iter {
        let (w, _lambda_lin) = match newton_step_manifold(problem, m, &u, &lambda) {
            Ok(pair) => pair,
            Err(Error::SingularLinearization { .. }) => {
                exit = NewtonExit::Singular;
                break;
            }
            Err(e) => return Err(e),
        };
        let (u_next, lambda_next) = restore(problem, m, &w)?;
        let step_norm = (&u_next - &u).norm();
        let r_next = phase_residual(problem, m, &u_next, &lambda_next)?;
        records.push(make_record(
            problem,
            k_offset + iter,
            &u_next,
            &lambda_next,
            r_next,
            active,
            Phase::Newton,
        ));
        if r_next > 2.0 * r && r_next > 10.0 * opts.tol_residual {
            doublings += 1;
        } else {
            doublings = 0;
        }
        u = u_next;
        lambda = lambda_next;
        r = r_next;
        if r <= opts.tol_residual {
            exit = NewtonExit::Converged;
            break;
        }
        if opts.safeguard && doublings >= 2 {
            exit = NewtonExit::Diverged;
            break;
        }
        if step_norm <= opts.tol_step {
            exit = NewtonExit::StepSmall;
            break;
        }
    }
    Ok((records, exit, u, lambda))
}

/// Errors used for the order fit: true distance when the solution is
/// known, the stopping residual otherwise.
fn record_errors(records: &[IterateRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| r.dist_to_solution.unwrap_or(r.residual))
        .collect()
}

/// Picks the asymptotic tail for an order fit: the longest strictly
/// decreasing suffix with values in `(0, 1e-2]` (skipping trailing
/// out-of-range entries), with a final round-off-floor value dropped when
/// at least three points remain.
fn fit_window(errors: &[f64]) -> Vec<f64> {
    let in_range = |e: f64| e > 0.0 && e <= FIT_WINDOW_TOP;
    let mut end = errors.len();
    while end > 0 && !in_range(errors[end - 1]) {
        end -= 1;
    }
    if end == 0 {
        return Vec::new();
    }
    let mut start = end - 1;
    while start > 0 && in_range(errors[start - 1]) && errors[start - 1] > errors[start] {
        start -= 1;
    }
    let mut out = errors[start..end].to_vec();
    while out.len() > 3 && *out.last().unwrap() <= ERROR_FLOOR {
        out.pop();
    }
    out
}

fn fitted_order_of(records: &[IterateRecord]) -> Option<f64> {
    let window = fit_window(&record_errors(records));
    fit_convergence_order(&window).ok()
}

/// Least-squares slope of `log e_{k+1}` against `log e_k`. Requires at
/// least three strictly decreasing entries in `(0, 1e-2]`.
pub fn fit_convergence_order(errors: &[f64]) -> Result<f64> {
    if errors.len() < 3 {
        return Err(Error::InsufficientData);
    }
    if errors
        .iter()
        .any(|&e| !(e > 0.0 && e <= FIT_WINDOW_TOP) || !e.is_finite())
    {
        return Err(Error::InsufficientData);
    }
    if errors.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InsufficientData);
    }
    let xs: Vec<f64> = errors[..errors.len() - 1].iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = errors[1..].iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var <= 0.0 {
        return Err(Error::InsufficientData);
    }
    Ok(cov / var)
}

/// Runs the Newton phase on a fixed manifold from `(u0, lambda0)`.
///
/// Iterates `newton_step_manifold` followed by `restore`, stopping when
/// the residual or the step drops below its tolerance. A singular reduced
/// system reports `TransversalityFail`; a safeguarded divergence exit and
/// a stalled step report `MaxIter`.
pub fn run_newton_phase(
    problem: &GenEqProblem,
    m: &Manifold,
    u0: &DVector<f64>,
    lambda0: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<SolverReport> {
    let (records, exit, _, _) = newton_phase_core(problem, m, u0, lambda0, opts, 0, &[])?;
    let status = match exit {
        NewtonExit::Converged => SolveStatus::Converged,
        NewtonExit::Singular => SolveStatus::TransversalityFail,
        NewtonExit::MaxIter | NewtonExit::Diverged | NewtonExit::StepSmall => SolveStatus::MaxIter,
    };
    let fitted_order = fitted_order_of(&records);
    Ok(SolverReport {
        history: records,
        status,
        fitted_order,
        switch_iteration: None,
    })
}

struct IdentifyOutcome {
    records: Vec<IterateRecord>,
    found: Option<(Manifold, DVector<f64>, Vec<usize>)>,
}

fn identify_core(
    problem: &GenEqProblem,
    k_set: &ConvexSet,
    a: f64,
    u0: &DVector<f64>,
    opts: &NewtonOptions,
    activity_cap: f64,
    k_offset: usize,
) -> Result<IdentifyOutcome> {
    if a <= 0.0 {
        return Err(Error::InvalidParameter("phase-1 parameter a must be > 0".into()));
    }
    let mut u = u0.clone();
    let mut records = Vec::new();
    let mut window: Vec<Vec<usize>> = Vec::new();
    let f = |x: &DVector<f64>| problem.f_value(x);
    for k in 0..opts.max_iter {
        let y = problem.forward_backward(1.0 / a, &u)?;
        let res = (&u - &y).norm();
        let act_tol = res.clamp(1e-10, activity_cap);
        let act = k_set.active_set(&y, act_tol);
        let v = (&u - &y) * a - problem.f_value(&u);
        records.push(make_record(
            problem,
            k_offset + k,
            &u,
            &v,
            res,
            &act,
            Phase::Identify,
        ));
        window.push(act.clone());
        if window.len() > STABILITY_WINDOW {
            window.remove(0);
        }
        if window.len() == STABILITY_WINDOW
            && window.iter().all(|w| *w == window[0])
            && nondegeneracy_check(k_set, &f, &y, NONDEGENERACY_TOL)?
        {
            let manifold = k_set.active_manifold(&act, y.len())?;
            let u_start = manifold.project_default(&y)?;
            return Ok(IdentifyOutcome {
                records,
                found: Some((manifold, u_start, act)),
            });
        }
        u = y;
    }
    Ok(IdentifyOutcome {
        records,
        found: None,
    })
}

/// Phase 1: iterate the projection map `y_a` until the active set of the
/// projected iterates is stable over a window and strictly complementary,
/// then return the active manifold and a starting point on it.
pub fn identify_phase(
    problem: &GenEqProblem,
    a: f64,
    u0: &DVector<f64>,
    opts: &NewtonOptions,
) -> Result<(Manifold, DVector<f64>, Vec<IterateRecord>)> {
    let OperatorPart::NormalCone(k_set) = &problem.psi else {
        return Err(Error::Unsupported(
            "identification requires a normal-cone operator part".into(),
        ));
    };
    let outcome = identify_core(problem, k_set, a, u0, opts, crate::geneq::DEFAULT_ACTIVITY_TOL, 0)?;
    match outcome.found {
        Some((m, u_start, _)) => Ok((m, u_start, outcome.records)),
        None => Err(Error::IdentificationStall {
            iterations: outcome.records.len(),
        }),
    }
}

/// The manifold a known solution lives on: the whole space for a zero
/// part, the carried manifold for a normal-space part, and the manifold of
/// constraints active at the known solution for a normal-cone part.
pub fn known_active_manifold(problem: &GenEqProblem) -> Result<Manifold> {
    let known = problem.known_solution.as_ref().ok_or_else(|| {
        Error::PreconditionViolated("problem has no known solution".into())
    })?;
    match &problem.psi {
        OperatorPart::Zero => Ok(Manifold::free(known.u.len())),
        OperatorPart::NormalSpace(m) => Ok(m.clone()),
        OperatorPart::NormalCone(k) => {
            let active = k.active_set(&known.u, 1e-8);
            k.active_manifold(&active, known.u.len())
        }
        OperatorPart::ScaledL1 { .. } => Err(Error::Unsupported(
            "no active manifold is catalogued for the scaled-l1 part".into(),
        )),
    }
}

fn report(
    history: Vec<IterateRecord>,
    status: SolveStatus,
    fitted_order: Option<f64>,
    switch_iteration: Option<usize>,
) -> SolverReport {
    SolverReport {
        history,
        status,
        fitted_order,
        switch_iteration,
    }
}

/// Two-phase driver.
///
/// For a normal-cone operator part, Phase 1 identifies the active manifold
/// and Phase 2 runs the manifold Newton iteration on it; a safeguarded
/// Newton exit (divergence, or convergence that the natural residual of
/// the original problem rejects) resumes Phase 1 with a tightened activity
/// tolerance, for at most three round trips. Normal-space and zero
/// operator parts skip Phase 1. `a` is the Phase 1 step parameter.
pub fn solve_two_phase(
    problem: &GenEqProblem,
    u0: &DVector<f64>,
    a: f64,
    opts: &NewtonOptions,
) -> Result<SolverReport> {
    match &problem.psi {
        OperatorPart::Zero => {
            let m = Manifold::free(u0.len());
            let (u_start, lambda0) = restore(problem, &m, u0)?;
            let (records, exit, _, _) =
                newton_phase_core(problem, &m, &u_start, &lambda0, opts, 0, &[])?;
            let status = match exit {
                NewtonExit::Converged => SolveStatus::Converged,
                NewtonExit::Singular => SolveStatus::TransversalityFail,
                _ => SolveStatus::MaxIter,
            };
            let fitted = fitted_order_of(&records);
            Ok(report(records, status, fitted, None))
        }
        OperatorPart::NormalSpace(m) => {
            let u_proj = m.project_default(u0)?;
            let (u_start, lambda0) = restore(problem, m, &u_proj)?;
            let (records, exit, _, _) =
                newton_phase_core(problem, m, &u_start, &lambda0, opts, 0, &[])?;
            let status = match exit {
                NewtonExit::Converged => SolveStatus::Converged,
                NewtonExit::Singular => SolveStatus::TransversalityFail,
                _ => SolveStatus::MaxIter,
            };
            let fitted = fitted_order_of(&records);
            Ok(report(records, status, fitted, None))
        }
        OperatorPart::NormalCone(k_set) => {
            let mut history: Vec<IterateRecord> = Vec::new();
            let mut u_cur = u0.clone();
            let mut cap = crate::geneq::DEFAULT_ACTIVITY_TOL;
            let mut switch = None;
            for _round in 0..MAX_ROUND_TRIPS {
                let outcome =
                    identify_core(problem, k_set, a, &u_cur, opts, cap, history.len())?;
                history.extend(outcome.records);
                let Some((manifold, u_start, active)) = outcome.found else {
                    return Ok(report(history, SolveStatus::IdentificationStall, None, switch));
                };
                let (u_s, lambda0) = restore(problem, &manifold, &u_start)?;
                switch = Some(history.len());
                let (records, exit, u_fin, lambda_fin) = newton_phase_core(
                    problem,
                    &manifold,
                    &u_s,
                    &lambda0,
                    opts,
                    history.len(),
                    &active,
                )?;
                let fitted = fitted_order_of(&records);
                history.extend(records);
                match exit {
                    NewtonExit::Converged => {
                        // Accept only if the original variational inequality
                        // agrees; a stationary point of the wrong manifold
                        // sends us back to Phase 1.
                        let nat = problem.natural_residual(a, &u_fin)?;
                        let kkt = phase_residual(problem, &manifold, &u_fin, &lambda_fin)?;
                        let accept_tol = (100.0 * opts.tol_residual).max(1e-9);
                        if nat <= accept_tol && kkt <= opts.tol_residual {
                            return Ok(report(history, SolveStatus::Converged, fitted, switch));
                        }
                        u_cur = u_fin;
                        cap = (cap * 1e-2).max(1e-10);
                    }
                    NewtonExit::Singular => {
                        return Ok(report(history, SolveStatus::TransversalityFail, fitted, switch));
                    }
                    NewtonExit::Diverged => {
                        u_cur = u_fin;
                        cap = (cap * 1e-2).max(1e-10);
                    }
                    NewtonExit::MaxIter | NewtonExit::StepSmall => {
                        return Ok(report(history, SolveStatus::MaxIter, fitted, switch));
                    }
                }
            }
            Ok(report(history, SolveStatus::MaxIter, None, switch))
        }
        OperatorPart::ScaledL1 { .. } => Err(Error::Unsupported(
            "the two-phase driver supports zero, normal-cone, and normal-space parts".into(),
        )),
    }
}
