//! Penalty dual decomposition for
//! `max Σ|qᵢᴴθ|² s.t. Σ|hᵢᴴθ|² ≤ γ, |θ_n| = 1`.
//!
//! The unit-modulus constraint is split off through a copy `ϑ` and the
//! equality `θ = ϑ` is penalized in an augmented Lagrangian. Each outer
//! iteration alternates a θ-update (successive convex approximation of the
//! concave objective, each step a convex projection) with a closed-form
//! ϑ-update, then updates the dual variable and shrinks the penalty parameter.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::problem::ProblemData;
use super::subproblem::{max_abs, solve_constrained_prox_from, solve_penalized_prox};
use crate::error::{invalid, Error, Result};
use crate::geometry::CVector;
use crate::power::ReflectionVector;

/// Feasibility slack used when choosing among candidate solutions.
const PICK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PddParams {
    /// Initial penalty parameter `ρ₀`.
    pub rho0: f64,
    /// Penalty scaling `c ∈ (0, 1)` applied after every outer iteration.
    pub c: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    /// Outer iteration cap `J₀`.
    pub max_outer: usize,
    /// Block-coordinate iteration cap `J₁`.
    pub max_inner: usize,
    /// SCA iteration cap `J₂`.
    pub max_sca: usize,
    /// Feasible starting points tried when no usable initial point is given.
    pub starts: usize,
}

impl Default for PddParams {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            c: 0.7,
            inner_tol: 1e-7,
            outer_tol: 1e-6,
            max_outer: 50,
            max_inner: 100,
            max_sca: 200,
            starts: 4,
        }
    }
}

impl PddParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(invalid("rho0", format!("must be positive, got {}", self.rho0)));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(invalid("c", format!("must lie in (0, 1), got {}", self.c)));
        }
        if !(self.inner_tol > 0.0) || !(self.outer_tol > 0.0) {
            return Err(invalid("inner_tol/outer_tol", "tolerances must be positive"));
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.max_sca == 0 {
            return Err(invalid("max_outer/max_inner/max_sca", "iteration caps must be at least 1"));
        }
        if self.starts == 0 {
            return Err(invalid("starts", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PddState {
    pub theta: CVector,
    /// Unit-modulus copy `ϑ`.
    pub vartheta: CVector,
    /// Dual variable `λ` of the equality `θ = ϑ`.
    pub lambda: CVector,
    /// Penalty parameter `ρ`.
    pub rho: f64,
}

impl PddState {
    pub fn start(theta: CVector, rho: f64) -> Self {
        let n = theta.len();
        Self {
            vartheta: theta.clone(),
            theta,
            lambda: CVector::zeros(n),
            rho,
        }
    }

    pub fn gap(&self) -> f64 {
        max_abs(&(&self.theta - &self.vartheta))
    }

    /// `−Σ|qᵢᴴθ|² + (1/2ρ)‖θ − ϑ + ρλ‖²`.
    pub fn augmented_objective(&self, problem: &ProblemData) -> f64 {
        augmented(problem, &self.theta, &self.vartheta, &self.lambda, self.rho)
    }
}

fn augmented(problem: &ProblemData, theta: &CVector, vartheta: &CVector, lambda: &CVector, rho: f64) -> f64 {
    let shifted = theta - vartheta + lambda * Complex64::new(rho, 0.0);
    -problem.objective(theta) + shifted.norm_squared() / (2.0 * rho)
}

/// Result of one θ-update.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaUpdate {
    pub theta: CVector,
    /// Augmented objective at the start and after every accepted SCA step.
    pub objectives: Vec<f64>,
    pub sca_iterations: usize,
    /// Largest KKT residual among the convex subproblems solved.
    pub max_kkt_residual: f64,
}

/// θ-update: repeatedly linearizes `−Σ|qᵢᴴθ|²` at the current point and
/// solves the resulting convex problem until the augmented objective settles.
pub fn inner_theta_update(state: &PddState, problem: &ProblemData, params: &PddParams) -> ThetaUpdate {
    let rho = state.rho;
    let qs = problem.objective_vectors();
    let hs = problem.constraint_vectors();
    let base = &state.vartheta - &state.lambda * Complex64::new(rho, 0.0);
    let eval = |t: &CVector| augmented(problem, t, &state.vartheta, &state.lambda, rho);

    let mut theta = state.theta.clone();
    let mut obj = eval(&theta);
    let mut objectives = vec![obj];
    let mut max_kkt: f64 = 0.0;
    let mut iterations = 0;
    let mut kappa = 0.0;
    for _ in 0..params.max_sca {
        iterations += 1;
        let mut a = base.clone();
        for q in &qs {
            // εᵢ = (qᵢᴴθ̃) qᵢ
            a.axpy(Complex64::new(2.0 * rho, 0.0) * q.dotc(&theta), q, Complex64::new(1.0, 0.0));
        }
        let sol = solve_constrained_prox_from(&a, &hs, problem.gamma, kappa);
        kappa = sol.kappa;
        max_kkt = max_kkt.max(sol.kkt_residual);
        let next = eval(&sol.theta);
        if next > obj + 1e-12 * obj.abs().max(1.0) {
            break;
        }
        let decrease = obj - next;
        theta = sol.theta;
        obj = next;
        objectives.push(obj);
        if decrease <= params.inner_tol * obj.abs().max(1.0) {
            break;
        }
    }
    ThetaUpdate {
        theta,
        objectives,
        sca_iterations: iterations,
        max_kkt_residual: max_kkt,
    }
}

/// ϑ-update: `ϑ_n = exp(j∠(θ_n + ρλ_n))`, with `ϑ_n = 1` when the argument is zero.
pub fn inner_vartheta_update(state: &PddState) -> CVector {
    let target = &state.theta + &state.lambda * Complex64::new(state.rho, 0.0);
    target.map(unit_phase)
}

fn unit_phase(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / z.norm()
    }
}

/// `λ ← λ + (θ − ϑ)/ρ`, then `ρ ← cρ`.
pub fn dual_and_penalty_update(state: &PddState, params: &PddParams) -> PddState {
    let step = (&state.theta - &state.vartheta) / Complex64::new(state.rho, 0.0);
    PddState {
        theta: state.theta.clone(),
        vartheta: state.vartheta.clone(),
        lambda: &state.lambda + step,
        rho: state.rho * params.c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub outer: usize,
    /// `Σ|qᵢᴴϑ|²` in the problem's units.
    pub objective: f64,
    /// `Σ|hᵢᴴϑ|²` in the problem's units.
    pub constraint: f64,
    /// `‖θ − ϑ‖∞`.
    pub gap: f64,
    pub rho: f64,
    pub sca_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PddSolution {
    /// Unit-modulus solution, canonicalized so entry 0 has phase 0.
    pub theta: ReflectionVector,
    pub objective: f64,
    pub constraint: f64,
    pub status: SolveStatus,
    pub trace: Vec<TraceEntry>,
    pub outer_iterations: usize,
    pub sca_iterations: usize,
}

impl PddSolution {
    pub fn coefficients(&self) -> CVector {
        self.theta.coefficients()
    }
}

struct Best {
    theta: Option<CVector>,
    objective: f64,
}

impl Best {
    fn consider(&mut self, problem: &ProblemData, theta: &CVector) {
        if !problem.is_feasible(theta, PICK_TOL) {
            return;
        }
        let obj = problem.objective(theta);
        if self.theta.is_none() || obj > self.objective {
            self.theta = Some(theta.clone());
            self.objective = obj;
        }
    }
}

pub(crate) fn project_unit(theta: &CVector) -> CVector {
    theta.map(unit_phase)
}

fn canonical(theta: &CVector) -> CVector {
    let rot = unit_phase(theta[0]).conj();
    theta * rot
}

/// Solves the problem with PDD. A given `init` is the only start when it is
/// feasible or phase descent can pull it inside the cap; otherwise PDD runs
/// from `params.starts` feasible points and the best result is kept.
pub fn pdd_solve(problem: &ProblemData, params: &PddParams, init: Option<&CVector>) -> Result<PddSolution> {
    problem.validate()?;
    params.validate()?;
    if let Some(v) = init {
        if v.len() != problem.len() {
            return Err(Error::DimensionMismatch {
                what: "initial reflection vector",
                expected: problem.len(),
                got: v.len(),
            });
        }
    }
    let (p, _) = problem.normalized();
    let to_watts = problem.gamma / p.gamma;

    let given = init.map(project_unit);
    let warm = given.as_ref().and_then(|v| {
        if p.is_feasible(v, 0.0) {
            Some(v.clone())
        } else {
            phase_descent(&p, v)
        }
    });
    let starts = match warm {
        Some(v) => vec![v],
        None => initial_points(&p, params).map_err(|e| match e {
            Error::Infeasible { min_constraint, .. } => Error::Infeasible {
                min_constraint: min_constraint * to_watts,
                gamma: problem.gamma,
            },
            other => other,
        })?,
    };

    let mut chosen: Option<Run> = None;
    let (mut outer_total, mut sca_total) = (0, 0);
    for start in &starts {
        let run = run_from(&p, problem, params, start, given.as_ref());
        outer_total += run.outer;
        sca_total += run.sca;
        if chosen.as_ref().is_none_or(|c| p.objective(&run.theta) > p.objective(&c.theta)) {
            chosen = Some(run);
        }
    }
    let run = chosen.expect("at least one start");
    Ok(PddSolution {
        objective: problem.objective(&run.theta),
        constraint: problem.constraint(&run.theta),
        theta: ReflectionVector::from_coefficients(&run.theta).canonicalized(),
        status: run.status,
        trace: run.trace,
        outer_iterations: outer_total,
        sca_iterations: sca_total,
    })
}

struct Run {
    theta: CVector,
    status: SolveStatus,
    trace: Vec<TraceEntry>,
    outer: usize,
    sca: usize,
}

/// One PDD pass on the normalized problem `p` from a feasible `start`.
/// `problem` is the original, used only for the trace.
fn run_from(p: &ProblemData, problem: &ProblemData, params: &PddParams, start: &CVector, given: Option<&CVector>) -> Run {
    let mut best = Best {
        theta: None,
        objective: f64::NEG_INFINITY,
    };
    best.consider(p, start);
    if let Some(v) = given {
        best.consider(p, v);
    }

    let mut state = PddState::start(start.clone(), params.rho0);
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut total_sca = 0;
    let mut outer_done = 0;
    for outer in 0..params.max_outer {
        outer_done = outer + 1;
        let mut prev = state.augmented_objective(p);
        let mut sca_here = 0;
        for _ in 0..params.max_inner {
            let upd = inner_theta_update(&state, p, params);
            sca_here += upd.sca_iterations;
            state.theta = upd.theta;
            state.vartheta = inner_vartheta_update(&state);
            let now = state.augmented_objective(p);
            let settled = (prev - now).abs() <= params.inner_tol * now.abs().max(1.0);
            prev = now;
            if settled {
                break;
            }
        }
        total_sca += sca_here;
        let gap = state.gap();
        best.consider(p, &state.vartheta);
        trace.push(TraceEntry {
            outer,
            objective: problem.objective(&state.vartheta),
            constraint: problem.constraint(&state.vartheta),
            gap,
            rho: state.rho,
            sca_iterations: sca_here,
        });
        state = dual_and_penalty_update(&state, params);
        if gap < params.outer_tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    for candidate in [project_unit(&state.theta), state.vartheta.clone()] {
        best.consider(p, &candidate);
        if !p.is_feasible(&candidate, PICK_TOL) {
            if let Some(fixed) = repair(p, &candidate, start) {
                best.consider(p, &fixed);
            }
        }
    }

    Run {
        theta: canonical(&polish(p, &best.theta.unwrap_or_else(|| start.clone()))),
        status,
        trace,
        outer: outer_done,
        sca: total_sca,
    }
}

/// Unit-modulus point maximizing the objective without the cap: phases of
/// the dominant eigenvector of `Σ qᵢqᵢᴴ` (or of a single `qᵢ` if better).
pub(crate) fn unconstrained_start(p: &ProblemData) -> CVector {
    let qs = p.objective_vectors();
    let mut candidates: Vec<CVector> = qs.iter().map(|q| project_unit(q)).collect();
    if qs.len() > 1 {
        let n = p.len();
        let mut gram = DMatrix::<Complex64>::zeros(n, n);
        for q in &qs {
            gram += *q * q.adjoint();
        }
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.imax();
        candidates.push(project_unit(&eig.eigenvectors.column(top).into_owned()));
    }
    candidates
        .into_iter()
        .max_by(|a, b| p.objective(a).total_cmp(&p.objective(b)))
        .expect("at least one objective vector")
}

fn blend(from: &CVector, to: &CVector, t: f64) -> CVector {
    from.zip_map(to, |a, b| {
        let delta = (b * a.conj()).arg();
        a * Complex64::from_polar(1.0, t * delta)
    })
}

/// Feasible warm start: the unconstrained optimum if it meets the cap,
/// otherwise the point on a phase path toward a constraint minimizer where
/// the cap becomes active.
fn initial_point(p: &ProblemData, params: &PddParams) -> Result<CVector> {
    let top = unconstrained_start(p);
    if p.is_feasible(&top, 0.0) {
        return Ok(top);
    }
    let mut null = minimize_constraint(p, params, &top);
    if !p.is_feasible(&null, 0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..4 {
            let seed = CVector::from_iterator(
                p.len(),
                (0..p.len()).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))),
            );
            let other = minimize_constraint(p, params, &seed);
            if p.constraint(&other) < p.constraint(&null) {
                null = other;
            }
            if p.is_feasible(&null, 0.0) {
                break;
            }
        }
    }
    if !p.is_feasible(&null, 0.0) {
        if p.is_feasible(&null, 1e-6) {
            if let Some(fixed) = phase_descent(p, &null) {
                null = fixed;
            }
        } else {
            return Err(Error::Infeasible {
                min_constraint: p.constraint(&null),
                gamma: p.gamma,
            });
        }
    }
    if !p.is_feasible(&null, 0.0) {
        return Ok(null);
    }
    Ok(cap_boundary(p, &top, &null))
}

/// First feasible point on the phase path from `from` to the feasible `to`.
fn cap_boundary(p: &ProblemData, from: &CVector, to: &CVector) -> CVector {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if p.is_feasible(&blend(from, to, mid), 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    blend(from, to, hi)
}

/// [`initial_point`] plus up to `starts − 1` more feasible points, each on
/// the path from the unconstrained optimum toward a constraint minimizer
/// grown from its own random seed.
fn initial_points(p: &ProblemData, params: &PddParams) -> Result<Vec<CVector>> {
    let mut points = vec![initial_point(p, params)?];
    if params.starts == 1 || !p.has_constraint() {
        return Ok(points);
    }
    let top = unconstrained_start(p);
    let top_feasible = p.is_feasible(&top, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0x57a7);
    for _ in 1..params.starts {
        let seed = CVector::from_iterator(
            p.len(),
            (0..p.len()).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))),
        );
        let target = if p.is_feasible(&seed, 0.0) {
            seed
        } else if let Some(t) = phase_descent(p, &seed) {
            t
        } else {
            minimize_constraint(p, params, &seed)
        };
        if !p.is_feasible(&target, 0.0) {
            continue;
        }
        points.push(if top_feasible { target } else { cap_boundary(p, &top, &target) });
    }
    Ok(points)
}

/// Minimizes `Σ|hᵢᴴθ|²` over unit-modulus `θ` with the same splitting.
pub(crate) fn minimize_constraint(p: &ProblemData, params: &PddParams, start: &CVector) -> CVector {
    let hs = p.constraint_vectors();
    let mut best = start.clone();
    let mut best_c = p.constraint(start);
    if hs.is_empty() {
        return best;
    }
    let mut state = PddState::start(start.clone(), params.rho0);
    let eval = |s: &PddState| {
        let shifted = &s.theta - &s.vartheta + &s.lambda * Complex64::new(s.rho, 0.0);
        p.constraint(&s.theta) + shifted.norm_squared() / (2.0 * s.rho)
    };
    for _ in 0..params.max_outer {
        let mut prev = eval(&state);
        for _ in 0..params.max_inner {
            let a = &state.vartheta - &state.lambda * Complex64::new(state.rho, 0.0);
            state.theta = solve_penalized_prox(&a, &hs, state.rho);
            state.vartheta = inner_vartheta_update(&state);
            let now = eval(&state);
            let settled = (prev - now).abs() <= params.inner_tol * now.abs().max(p.gamma);
            prev = now;
            if settled {
                break;
            }
        }
        let c = p.constraint(&state.vartheta);
        if c < best_c {
            best_c = c;
            best = state.vartheta.clone();
        }
        let gap = state.gap();
        state = dual_and_penalty_update(&state, params);
        if gap < params.outer_tol || best_c <= 1e-3 * p.gamma {
            break;
        }
    }
    best
}

/// Gauss–Newton steps on the phases that push the cap just below `γ`.
fn phase_descent(p: &ProblemData, theta: &CVector) -> Option<CVector> {
    let hs = p.constraint_vectors();
    let target = p.gamma * (1.0 - 1e-9);
    let mut current = theta.clone();
    for _ in 0..50 {
        let c = p.constraint(&current);
        if c <= target {
            return Some(current);
        }
        let mut grad = vec![0.0; current.len()];
        for h in &hs {
            let s = h.dotc(&current);
            for (n, g) in grad.iter_mut().enumerate() {
                let ds = h[n].conj() * Complex64::new(0.0, 1.0) * current[n];
                *g += 2.0 * (s.conj() * ds).re;
            }
        }
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            return None;
        }
        let mut step = (c - target) / g2;
        let mut improved = false;
        for _ in 0..30 {
            let trial = CVector::from_iterator(
                current.len(),
                current.iter().zip(&grad).map(|(z, g)| z * Complex64::from_polar(1.0, -step * g)),
            );
            if p.constraint(&trial) < c {
                current = trial;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    p.is_feasible(&current, 0.0).then_some(current)
}

/// `Σ|xᴴθ|²` with its gradient and Hessian in the phases `ω` of `θ = e^{jω}`.
fn phase_derivatives(xs: &[&CVector], theta: &CVector) -> (f64, DVector<f64>, DMatrix<f64>) {
    let n = theta.len();
    let mut value = 0.0;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let j = Complex64::new(0.0, 1.0);
    for x in xs {
        let s = x.dotc(theta);
        let d: Vec<Complex64> = (0..n).map(|k| j * x[k].conj() * theta[k]).collect();
        value += s.norm_sqr();
        for a in 0..n {
            grad[a] += 2.0 * (s.conj() * d[a]).re;
            hess[(a, a)] -= 2.0 * (s.conj() * x[a].conj() * theta[a]).re;
            for b in 0..n {
                hess[(a, b)] += 2.0 * (d[b].conj() * d[a]).re;
            }
        }
    }
    (value, grad, hess)
}

/// Newton iteration on the KKT system of the phase problem with the cap
/// active. Phase 0 is held fixed. Steps are kept only if they stay feasible
/// and raise the objective, so the result is never worse than `theta`.
fn polish(p: &ProblemData, theta: &CVector) -> CVector {
    let mut current = theta.clone();
    if !p.has_constraint() || theta.len() < 2 {
        return current;
    }
    let qs = p.objective_vectors();
    let hs = p.constraint_vectors();
    let m = theta.len() - 1;
    for _ in 0..30 {
        let (f, gf, hf) = phase_derivatives(&qs, &current);
        let (c, gc, hc) = phase_derivatives(&hs, &current);
        if c < p.gamma * (1.0 - 1e-6) {
            break;
        }
        let gf = gf.rows(1, m).into_owned();
        let gc = gc.rows(1, m).into_owned();
        let gc2 = gc.norm_squared();
        if gc2 == 0.0 {
            break;
        }
        let mu = gf.dot(&gc) / gc2;
        if mu <= 0.0 {
            break;
        }
        let residual = &gf - &gc * mu;
        if residual.norm() <= 1e-13 * gf.norm().max(f) {
            break;
        }
        let mut jac = DMatrix::zeros(m + 1, m + 1);
        jac.view_mut((0, 0), (m, m))
            .copy_from(&(hf.view((1, 1), (m, m)) - hc.view((1, 1), (m, m)) * mu));
        jac.view_mut((0, m), (m, 1)).copy_from(&(-&gc));
        jac.view_mut((m, 0), (1, m)).copy_from(&(-gc.transpose()));
        let mut rhs = DVector::zeros(m + 1);
        rhs.rows_mut(0, m).copy_from(&(-residual));
        rhs[m] = c - p.gamma;
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        let mut accepted = false;
        let mut alpha = 1.0;
        for _ in 0..20 {
            let mut trial = current.clone();
            for k in 0..m {
                trial[k + 1] *= Complex64::from_polar(1.0, alpha * step[k]);
            }
            let trial = if p.constraint(&trial) > p.gamma {
                phase_descent(p, &trial)
            } else {
                Some(trial)
            };
            if let Some(t) = trial {
                if p.is_feasible(&t, 0.0) && p.objective(&t) > f {
                    current = t;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    current
}

/// Pulls a slightly infeasible unit-modulus point back inside the cap,
/// first by local phase descent, then along the phase path to `anchor`.
fn repair(p: &ProblemData, candidate: &CVector, anchor: &CVector) -> Option<CVector> {
    if let Some(fixed) = phase_descent(p, candidate) {
        return Some(fixed);
    }
    if !p.is_feasible(anchor, 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if p.is_feasible(&blend(candidate, anchor, mid), 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(blend(candidate, anchor, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn vec_of(values: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(values.len(), values.iter().map(|&(re, im)| Complex64::new(re, im)))
    }

    fn random_problem(rng: &mut impl Rng, n: usize, gamma_frac: f64) -> ProblemData {
        let mut rv = || {
            CVector::from_iterator(
                n,
                (0..n).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))),
            )
        };
        let (q1, q2, h1, h2) = (rv(), rv() * Complex64::new(0.5, 0.0), rv(), rv() * Complex64::new(0.7, 0.0));
        let mut p = ProblemData::new(q1, q2, h1, h2, 1.0, 1.0).unwrap();
        let top = unconstrained_start(&p);
        p.gamma = p.constraint(&top) * gamma_frac;
        p
    }

    #[test]
    fn vartheta_takes_phase_of_shifted_theta() {
        let state = PddState {
            theta: vec_of(&[(3.0, 4.0), (2.0, 0.0), (0.5, 0.0), (-1.0, 0.0)]),
            vartheta: CVector::zeros(4),
            lambda: vec_of(&[(0.0, 0.0), (0.0, 0.0), (-1.0, 0.0), (0.0, 1.0)]),
            rho: 0.5,
        };
        let v = inner_vartheta_update(&state);
        assert!((v[0] - Complex64::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(v[1], Complex64::new(1.0, 0.0));
        // 0.5 + 0.5·(−1) = 0 → tie-break to 1
        assert_eq!(v[2], Complex64::new(1.0, 0.0));
        assert!((v[3] - Complex64::from_polar(1.0, (0.5f64).atan2(-1.0))).norm() < 1e-15);
    }

    #[test]
    fn dual_update_rules() {
        let params = PddParams {
            c: 0.5,
            ..PddParams::default()
        };
        let theta = vec_of(&[(1.0, 0.0), (0.0, 1.0)]);
        let mut state = PddState::start(theta, 1.0);
        state.lambda = vec_of(&[(0.2, 0.1), (0.0, -0.3)]);
        let next = dual_and_penalty_update(&state, &params);
        assert_eq!(next.lambda, state.lambda);
        assert_eq!(next.rho, 0.5);
        state.theta[0] = Complex64::new(0.5, 0.0);
        let next = dual_and_penalty_update(&state, &params);
        assert!((next.lambda[0] - Complex64::new(-0.3, 0.1)).norm() < 1e-15);
    }

    #[test]
    fn unconstrained_theta_step_is_clipped_stationary_point() {
        let q = vec_of(&[(1.0, 0.0), (0.0, 1.0), (-0.5, 0.5)]);
        let p = ProblemData::new(q.clone(), CVector::zeros(3), CVector::zeros(3), CVector::zeros(3), 1.0, 1.0).unwrap();
        let state = PddState {
            theta: vec_of(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]),
            vartheta: vec_of(&[(0.0, 1.0), (1.0, 0.0), (-1.0, 0.0)]),
            lambda: vec_of(&[(0.1, 0.0), (0.0, 0.2), (0.0, 0.0)]),
            rho: 0.3,
        };
        let params = PddParams {
            max_sca: 1,
            ..PddParams::default()
        };
        let upd = inner_theta_update(&state, &p, &params);
        let eps = &q * q.dotc(&state.theta);
        let a = &state.vartheta - &state.lambda * Complex64::new(0.3, 0.0) + eps * Complex64::new(0.6, 0.0);
        let expected = a.map(super::super::subproblem::clip);
        assert!(max_abs(&(&upd.theta - expected)) < 1e-14);
    }

    #[test]
    fn orthogonal_linearization_point_drops_taylor_term() {
        let q = vec_of(&[(1.0, 0.0), (1.0, 0.0)]);
        let p = ProblemData::new(q, CVector::zeros(2), CVector::zeros(2), CVector::zeros(2), 1.0, 1.0).unwrap();
        let state = PddState {
            theta: vec_of(&[(1.0, 0.0), (-1.0, 0.0)]),
            vartheta: vec_of(&[(0.0, 0.5), (0.3, 0.0)]),
            lambda: CVector::zeros(2),
            rho: 1.0,
        };
        let params = PddParams {
            max_sca: 1,
            ..PddParams::default()
        };
        let upd = inner_theta_update(&state, &p, &params);
        assert!(max_abs(&(&upd.theta - &state.vartheta)) < 1e-15);
    }

    #[test]
    fn fixed_point_is_preserved() {
        let q = vec_of(&[(1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0)]);
        let u = project_unit(&q);
        let p = ProblemData::new(q, CVector::zeros(4), CVector::zeros(4), CVector::zeros(4), 1.0, 1.0).unwrap();
        let state = PddState::start(u.clone(), 1.0);
        let upd = inner_theta_update(&state, &p, &PddParams::default());
        assert!(max_abs(&(&upd.theta - &u)) < 1e-7);
    }

    #[test]
    fn sca_steps_never_increase_augmented_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let p = random_problem(&mut rng, 8, 0.2);
            let (p, _) = p.normalized();
            let start = initial_point(&p, &PddParams::default()).unwrap();
            let mut state = PddState::start(start, 1.0);
            for _ in 0..5 {
                let upd = inner_theta_update(&state, &p, &PddParams::default());
                for w in upd.objectives.windows(2) {
                    assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
                }
                assert!(upd.max_kkt_residual <= 1e-7);
                state.theta = upd.theta;
                state.vartheta = inner_vartheta_update(&state);
                state = dual_and_penalty_update(&state, &PddParams::default());
            }
        }
    }

    #[test]
    fn single_element_is_a_data_check() {
        let p = ProblemData::new(
            vec_of(&[(0.3, 0.4)]),
            vec_of(&[(1.0, 0.0)]),
            vec_of(&[(0.1, 0.0)]),
            CVector::zeros(1),
            0.02,
            1.0,
        )
        .unwrap();
        let sol = pdd_solve(&p, &PddParams::default(), None).unwrap();
        assert_relative_eq!(sol.objective, 0.25 + 1.0, max_relative = 1e-12);
        let mut tight = p.clone();
        tight.gamma = 0.005;
        assert!(matches!(pdd_solve(&tight, &PddParams::default(), None), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn random_instances_are_feasible_and_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let p = random_problem(&mut rng, 12, 0.1);
            let sol = pdd_solve(&p, &PddParams::default(), None).unwrap();
            assert!(sol.constraint <= p.gamma * (1.0 + 1e-6));
            assert!(sol.theta.coefficients().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
            assert_eq!(sol.theta.phases[0], 0.0);
            if sol.status == SolveStatus::Converged {
                assert!(sol.trace.last().unwrap().gap < 1e-6);
            }
        }
    }

    #[test]
    fn feasible_init_never_loses_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_problem(&mut rng, 10, 0.3);
        let first = pdd_solve(&p, &PddParams::default(), None).unwrap();
        let again = pdd_solve(&p, &PddParams::default(), Some(&first.coefficients())).unwrap();
        assert!(again.objective >= first.objective * (1.0 - 1e-12));
    }
}
