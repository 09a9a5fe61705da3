//! Backward-Euler time stepping of the mass-lumped scheme.
//!
//! Each step solves, for the nodal vectors `α = Uⁿ` and `β = Wⁿ`,
//!
//! ```text
//! M̄ⁿα + τAⁿβ                          = M̄ⁿ⁻¹αⁿ⁻¹
//! (−εAⁿ + M̄ⁿ/ε)α + M̄ⁿβ − (θ/2ε)M̄ⁿf(α) = 0
//! ```
//!
//! by damped Newton. Unknowns are interleaved `(α_0, β_0, α_1, β_1, …)` in
//! the linear solves so the nested-dissection order of the mesh graph
//! carries over to the block system. Equations are interleaved in swapped
//! order (row 2 of node `i` first), which puts the large entries
//! `−εA_ii + M̄_ii/ε − …` and `M̄_ii` on the diagonal and keeps threshold
//! pivoting inside the node blocks.
//!
//! The LU factors of the most recent Jacobian are kept across Newton
//! iterations and steps and serve as a preconditioner for GMRES; the
//! Jacobian is refactorized when GMRES stops converging quickly.

use std::sync::Mutex;

use log::{debug, warn};

use crate::assembly::{FeFunction, SnapshotMatrices};
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result, StepFailure};
use crate::geometry::SurfaceFamily;
use crate::krylov::gmres;
use crate::lu::{expand_blocks, nested_dissection, CscMatrix, LuFactors};
use crate::mesh::{advect_mesh, SurfaceMesh};
use crate::potential::{f_log, Nonlinearity, PotentialParams};
use crate::sparse::SparseSymMatrix;

const PIVOT_TOL: f64 = 0.1;
/// Relative accuracy of the Newton corrections.
const LINEAR_TOL: f64 = 1e-12;
/// GMRES steps before a fresh factorization is forced.
const KRYLOV_MAX: usize = 30;
/// GMRES steps beyond which the next solve refactorizes.
const KRYLOV_REFRESH: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub potential: PotentialParams,
    pub tau: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub damping_max_halvings: usize,
    pub feasibility_margin: f64,
    /// Decreasing δ values tried when the exact Newton solve stalls.
    pub delta_schedule: Vec<f64>,
}

impl SchemeParams {
    pub fn new(potential: PotentialParams, tau: f64, t_end: f64) -> Self {
        SchemeParams {
            potential,
            tau,
            t_end,
            newton_tol: 1e-9,
            newton_max_iters: 30,
            damping_max_halvings: 20,
            feasibility_margin: 1e-9,
            delta_schedule: vec![1e-2, 1e-3, 1e-4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau = {} must be positive", self.tau)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end = {} must be non-negative", self.t_end)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iters == 0 {
            return Err(Error::Config("Newton tolerance and iteration cap must be positive".into()));
        }
        if !(self.feasibility_margin > 0.0 && self.feasibility_margin < 0.5) {
            return Err(Error::Config(format!(
                "feasibility margin {} must lie in (0, 0.5)",
                self.feasibility_margin
            )));
        }
        if self.delta_schedule.iter().any(|&d| !(d > 0.0 && d < 0.5))
            || self.delta_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Config("delta schedule must be decreasing values in (0, 0.5)".into()));
        }
        Ok(())
    }

    /// Advisory messages about the step size relative to `ε` and the mesh size.
    pub fn warnings(&self, h: f64) -> Vec<String> {
        let eps3 = self.potential.epsilon.powi(3);
        let mut out = Vec::new();
        if self.tau >= 0.5 * eps3 {
            out.push(format!(
                "tau = {:e} >= eps^3/2 = {:e}: the stability bound of the scheme is not covered",
                self.tau,
                0.5 * eps3
            ));
        }
        if self.tau >= 4.0 * eps3 {
            out.push(format!(
                "tau = {:e} >= 4 eps^3 = {:e}: the discrete solution may not be unique",
                self.tau,
                4.0 * eps3
            ));
        }
        if self.tau > 10.0 * h * h {
            out.push(format!("tau = {:e} > 10 h^2 = {:e}: CFL-type restriction violated", self.tau, 10.0 * h * h));
        }
        out
    }

    /// Number of steps to reach `t_end`; the last one is shortened if needed.
    pub fn step_count(&self) -> usize {
        let ratio = self.t_end / self.tau;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }

    /// Time of step `n`.
    pub fn time_of(&self, n: usize) -> f64 {
        if n >= self.step_count() {
            self.t_end
        } else {
            (n as f64 * self.tau).min(self.t_end)
        }
    }
}

/// Cumulative Newton counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonStats {
    /// Linear solves of the most recent step (fallback solves included).
    pub last_iters: usize,
    pub total_iters: usize,
    pub fallback_steps: usize,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub step: usize,
    pub time: f64,
    pub mesh: SurfaceMesh,
    pub matrices: SnapshotMatrices,
    pub u: FeFunction,
    pub w: FeFunction,
    /// `M̄ⁿαⁿ`, the right-hand side of the next step's first row.
    pub rhs_cache: Vec<f64>,
    pub stats: NewtonStats,
}

impl SolverState {
    pub fn mass(&self) -> f64 {
        self.matrices.integral(&self.u.coefficients)
    }

    /// Node with the largest `|U_i|` and that value.
    pub fn worst_node(&self) -> (usize, f64) {
        worst_node(&self.u.coefficients)
    }
}

fn worst_node(alpha: &[f64]) -> (usize, f64) {
    alpha
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Algebraic system of one step.
#[derive(Debug, Clone)]
pub struct StepSystem<'a> {
    pub lumped: &'a [f64],
    pub stiffness: &'a SparseSymMatrix,
    pub rhs_cache: &'a [f64],
    pub tau: f64,
    pub potential: PotentialParams,
}

impl StepSystem<'_> {
    pub fn dim(&self) -> usize {
        self.lumped.len()
    }

    /// Residual in block layout `[row 1; row 2]`, length `2N`.
    pub fn residual(&self, alpha: &[f64], beta: &[f64], nl: Nonlinearity) -> Result<Vec<f64>> {
        let n = self.dim();
        let eps = self.potential.epsilon;
        let c = 0.5 * self.potential.theta / eps;
        let a_beta = self.stiffness.mul_vec(beta);
        let a_alpha = self.stiffness.mul_vec(alpha);
        let mut r = vec![0.0; 2 * n];
        for i in 0..n {
            let m = self.lumped[i];
            let f = nl.value(alpha[i]).map_err(|e| match e {
                Error::Domain(msg) => Error::Feasibility(format!("node {i}: {msg}")),
                other => other,
            })?;
            r[i] = m * alpha[i] + self.tau * a_beta[i] - self.rhs_cache[i];
            r[n + i] = -eps * a_alpha[i] + m * alpha[i] / eps + m * beta[i] - c * m * f;
        }
        Ok(r)
    }

    /// Jacobian at `alpha` in the interleaved unknown layout.
    pub fn jacobian(&self, alpha: &[f64], nl: Nonlinearity) -> Result<CscMatrix> {
        let n = self.dim();
        let eps = self.potential.epsilon;
        let c = 0.5 * self.potential.theta / eps;
        let mut triplets = Vec::with_capacity(2 * self.stiffness.nnz() + 4 * n);
        for i in 0..n {
            let m = self.lumped[i];
            let fp = nl.derivative(alpha[i])?;
            // row 1 of node i lives at 2i + 1, row 2 at 2i
            triplets.push((2 * i + 1, 2 * i, m));
            triplets.push((2 * i, 2 * i + 1, m));
            triplets.push((2 * i, 2 * i, m / eps - c * m * fp));
            for (j, a) in self.stiffness.row(i) {
                triplets.push((2 * i + 1, 2 * j + 1, self.tau * a));
                triplets.push((2 * i, 2 * j, -eps * a));
            }
        }
        Ok(CscMatrix::from_triplets(2 * n, &triplets))
    }

    /// Jacobian-vector product in block layout.
    pub fn jacobian_apply(&self, alpha: &[f64], nl: Nonlinearity, da: &[f64], db: &[f64]) -> Result<Vec<f64>> {
        let jac = self.jacobian(alpha, nl)?;
        let prod = jac.mul_vec(&interleave(da, db));
        let (r2, r1) = deinterleave(&prod);
        Ok([r1, r2].concat())
    }
}

fn interleave(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).flat_map(|(&x, &y)| [x, y]).collect()
}

fn deinterleave(v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().step_by(2).copied().collect(), v.iter().skip(1).step_by(2).copied().collect())
}

/// Converged Newton iterate.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Last iterate of a Newton solve that did not converge.
#[derive(Debug, Clone)]
pub struct NewtonStall {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub reason: String,
}

/// Advances solutions of the scheme on one surface family.
#[derive(Debug)]
pub struct Stepper {
    family: SurfaceFamily,
    params: SchemeParams,
    /// Interleaved elimination order of the block system.
    order: Vec<usize>,
    /// Factors of a recent Jacobian; `None` forces a factorization.
    factors: Mutex<Option<LuFactors>>,
}

impl Clone for Stepper {
    fn clone(&self) -> Self {
        Stepper {
            family: self.family,
            params: self.params.clone(),
            order: self.order.clone(),
            factors: Mutex::new(None),
        }
    }
}

impl Stepper {
    pub fn new(mesh: &SurfaceMesh, family: SurfaceFamily, params: SchemeParams) -> Result<Self> {
        params.validate()?;
        if mesh.family() != Some(family) {
            return Err(Error::Precondition(format!("mesh was not generated for the {family} family")));
        }
        let order = expand_blocks(&nested_dissection(&mesh.vertex_adjacency()), 2);
        Ok(Stepper { family, params, order, factors: Mutex::new(None) })
    }

    pub fn family(&self) -> SurfaceFamily {
        self.family
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    /// State at step 0; `W⁰` solves the second row with `α = U⁰` clamped
    /// into the feasible range.
    pub fn initial_state(&self, mesh: &SurfaceMesh, u0: FeFunction) -> Result<SolverState> {
        u0.check_bound_to(mesh)?;
        let matrices = SnapshotMatrices::assemble(mesh);
        let eps = self.params.potential.epsilon;
        let c = 0.5 * self.params.potential.theta / eps;
        let bound = 1.0 - self.params.feasibility_margin;
        let clamped: Vec<f64> = u0.coefficients.iter().map(|v| v.clamp(-bound, bound)).collect();
        let a_alpha = matrices.stiffness.mul_vec(&clamped);
        let w = clamped
            .iter()
            .zip(&a_alpha)
            .zip(&matrices.lumped)
            .map(|((&a, &aa), &m)| Ok(eps * aa / m - a / eps + c * f_log(a)?))
            .collect::<Result<Vec<f64>>>()?;
        let rhs_cache = matrices.lumped.iter().zip(&u0.coefficients).map(|(m, v)| m * v).collect();
        Ok(SolverState {
            step: 0,
            time: mesh.time(),
            mesh: mesh.clone(),
            matrices,
            w: FeFunction { coefficients: w, mesh_time: mesh.time() },
            u: u0,
            rhs_cache,
            stats: NewtonStats::default(),
        })
    }

    fn next_snapshot(&self, state: &SolverState) -> Result<(SurfaceMesh, SnapshotMatrices, f64)> {
        if state.step >= self.params.step_count() {
            return Err(Error::Precondition(format!("t_end = {} already reached", self.params.t_end)));
        }
        let t_new = self.params.time_of(state.step + 1);
        let mesh = advect_mesh(&state.mesh, self.family, t_new)?;
        let matrices = SnapshotMatrices::assemble(&mesh);
        Ok((mesh, matrices, t_new - state.time))
    }

    fn system<'a>(&self, matrices: &'a SnapshotMatrices, state: &'a SolverState, tau: f64) -> StepSystem<'a> {
        StepSystem {
            lumped: &matrices.lumped,
            stiffness: &matrices.stiffness,
            rhs_cache: &state.rhs_cache,
            tau,
            potential: self.params.potential,
        }
    }

    /// Damped Newton from `guess`. With the exact nonlinearity every
    /// iterate stays within `1 − feasibility_margin` of the poles.
    pub fn solve(
        &self,
        sys: &StepSystem,
        nl: Nonlinearity,
        guess: (Vec<f64>, Vec<f64>),
    ) -> std::result::Result<NewtonOutcome, NewtonStall> {
        let p = &self.params;
        let bound = 1.0 - p.feasibility_margin;
        let exact = nl == Nonlinearity::Exact;
        let (mut alpha, mut beta) = guess;
        if exact {
            alpha.iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
        }
        let scale = norm(sys.lumped);
        let target = p.newton_tol * scale;
        let stall = |alpha: Vec<f64>, beta: Vec<f64>, iterations, residual, reason: String| NewtonStall {
            alpha,
            beta,
            iterations,
            residual,
            reason,
        };
        let mut r = match sys.residual(&alpha, &beta, nl) {
            Ok(r) => r,
            Err(e) => return Err(stall(alpha, beta, 0, f64::INFINITY, e.to_string())),
        };
        let mut rn = norm(&r);
        let mut iterations = 0;
        loop {
            if iterations > 0 && rn <= target {
                return Ok(NewtonOutcome { alpha, beta, iterations, residual: rn / scale });
            }
            if iterations == p.newton_max_iters {
                return Err(stall(alpha, beta, iterations, rn / scale, "iteration cap reached".into()));
            }
            let jac = match sys.jacobian(&alpha, nl) {
                Ok(j) => j,
                Err(e) => return Err(stall(alpha, beta, iterations, rn / scale, e.to_string())),
            };
            let n = alpha.len();
            let neg: Vec<f64> = interleave(&r[n..], &r[..n]).iter().map(|v| -v).collect();
            let (da, db) = match self.linear_solve(&jac, &neg) {
                Ok(x) => deinterleave(&x),
                Err(e) => return Err(stall(alpha, beta, iterations, rn / scale, e.to_string())),
            };
            iterations += 1;

            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=p.damping_max_halvings {
                let ta: Vec<f64> = alpha.iter().zip(&da).map(|(a, d)| a + lambda * d).collect();
                let feasible = !exact || ta.iter().all(|v| v.abs() <= bound);
                if feasible {
                    let tb: Vec<f64> = beta.iter().zip(&db).map(|(b, d)| b + lambda * d).collect();
                    if let Ok(tr) = sys.residual(&ta, &tb, nl) {
                        let tn = norm(&tr);
                        if tn < rn || tn <= target {
                            accepted = Some((ta, tb, tr, tn));
                            break;
                        }
                    }
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((ta, tb, tr, tn)) => {
                    debug!("newton iter {iterations}: residual {:.3e}, damping {lambda}", tn / scale);
                    alpha = ta;
                    beta = tb;
                    r = tr;
                    rn = tn;
                }
                None => {
                    return Err(stall(alpha, beta, iterations, rn / scale, "damping exhausted".into()));
                }
            }
        }
    }

    /// [`Stepper::solve`], retried on a stall by continuation in the step
    /// length: the system is solved for `s τ` with `s` walking from 0 to 1,
    /// each solution seeding the next. At `s = 0` the solution is the
    /// transported previous state, so this follows the solution branch
    /// through it until `s = 1` or a fold.
    pub fn solve_continued(
        &self,
        sys: &StepSystem,
        nl: Nonlinearity,
        guess: (Vec<f64>, Vec<f64>),
    ) -> std::result::Result<NewtonOutcome, NewtonStall> {
        let stall = match self.solve(sys, nl, guess.clone()) {
            Ok(out) => return Ok(out),
            Err(stall) => stall,
        };
        debug!("Newton stalled ({}); continuing in the step length", stall.reason);
        let mut iterations = stall.iterations;
        let (mut s, mut ds) = (0.0f64, 0.125f64);
        let mut current = guess;
        while s < 1.0 {
            let target = (s + ds).min(1.0);
            let partial = StepSystem { tau: sys.tau * target, ..sys.clone() };
            match self.solve(&partial, nl, current.clone()) {
                Ok(out) => {
                    iterations += out.iterations;
                    s = target;
                    if s == 1.0 {
                        return Ok(NewtonOutcome { iterations, ..out });
                    }
                    current = (out.alpha, out.beta);
                    ds = (2.0 * ds).min(0.5);
                }
                Err(st) => {
                    iterations += st.iterations;
                    ds *= 0.5;
                    if ds < 1.0 / 1024.0 {
                        return Err(NewtonStall {
                            iterations,
                            reason: format!("continuation stopped at s = {s}: {}", st.reason),
                            ..st
                        });
                    }
                }
            }
        }
        unreachable!("continuation returns once s reaches 1")
    }

    /// Solves `jac x = b` by GMRES preconditioned with the cached factors,
    /// refactorizing `jac` when there are none or GMRES is too slow.
    fn linear_solve(&self, jac: &CscMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.factors.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(lu) = cache.as_ref() {
            let out = gmres(|v| jac.mul_vec(v), |v| lu.solve(v), b, LINEAR_TOL, KRYLOV_MAX);
            if out.converged && out.x.iter().all(|v| v.is_finite()) {
                if out.iterations > KRYLOV_REFRESH {
                    *cache = None;
                }
                return Ok(out.x);
            }
            debug!("GMRES stalled at {:.2e} after {} steps; refactorizing", out.relative_residual, out.iterations);
        }
        *cache = None;
        let lu = LuFactors::factorize(jac, &self.order, PIVOT_TOL)?;
        let x = lu.solve(b);
        // one step of iterative refinement against the fresh factors
        let r: Vec<f64> = jac.mul_vec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
        let x = x.iter().zip(lu.solve(&r)).map(|(a, d)| a + d).collect();
        *cache = Some(lu);
        Ok(x)
    }

    fn failure(&self, state: &SolverState, stall: &NewtonStall, reason: String) -> Error {
        let (worst_node, worst_value) = worst_node(&stall.alpha);
        Error::Step(Box::new(StepFailure {
            step: state.step + 1,
            time: self.params.time_of(state.step + 1),
            last_residual: stall.residual,
            worst_node,
            worst_value,
            reason,
        }))
    }

    fn accept(
        &self,
        state: &SolverState,
        mesh: SurfaceMesh,
        matrices: SnapshotMatrices,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        iters: usize,
        fallback: bool,
    ) -> SolverState {
        let t = mesh.time();
        let rhs_cache = matrices.lumped.iter().zip(&alpha).map(|(m, v)| m * v).collect();
        let mut stats = state.stats.clone();
        stats.last_iters = iters;
        stats.total_iters += iters;
        stats.fallback_steps += usize::from(fallback);
        SolverState {
            step: state.step + 1,
            time: t,
            mesh,
            matrices,
            u: FeFunction { coefficients: alpha, mesh_time: t },
            w: FeFunction { coefficients: beta, mesh_time: t },
            rhs_cache,
            stats,
        }
    }

    /// One step of the scheme with the exact logarithm, falling back to
    /// δ-continuation when Newton stalls.
    pub fn newton_step(&self, state: &SolverState) -> Result<SolverState> {
        let (mesh, matrices, tau) = self.next_snapshot(state)?;
        let sys = self.system(&matrices, state, tau);
        let guess = (state.u.coefficients.clone(), state.w.coefficients.clone());
        let stall = match self.solve_continued(&sys, Nonlinearity::Exact, guess.clone()) {
            Ok(out) => return Ok(self.accept(state, mesh, matrices, out.alpha, out.beta, out.iterations, false)),
            Err(stall) => stall,
        };
        warn!(
            "step {}: exact Newton stalled ({}, residual {:.3e}); trying regularized continuation",
            state.step + 1,
            stall.reason,
            stall.residual
        );
        let mut iters = stall.iterations;
        let mut warm = guess;
        for (k, &delta) in self.params.delta_schedule.iter().enumerate() {
            match self.solve_continued(&sys, Nonlinearity::Regularized(delta), warm.clone()) {
                Ok(out) => {
                    iters += out.iterations;
                    warm = (out.alpha, out.beta);
                }
                Err(s) if k == 0 => {
                    return Err(self.failure(state, &s, format!("regularized solve with delta = {delta} failed: {}", s.reason)));
                }
                Err(s) => {
                    iters += s.iterations;
                    break;
                }
            }
        }
        match self.solve_continued(&sys, Nonlinearity::Exact, warm) {
            Ok(out) => Ok(self.accept(state, mesh, matrices, out.alpha, out.beta, iters + out.iterations, true)),
            Err(s) => Err(self.failure(state, &s, format!("exact solve after continuation failed: {}", s.reason))),
        }
    }

    /// One step with `f` replaced by `f^δ`. The result need not satisfy
    /// the strict bounds.
    pub fn regularized_step(&self, state: &SolverState, delta: f64) -> Result<SolverState> {
        let (mesh, matrices, tau) = self.next_snapshot(state)?;
        let sys = self.system(&matrices, state, tau);
        let guess = (state.u.coefficients.clone(), state.w.coefficients.clone());
        match self.solve_continued(&sys, Nonlinearity::Regularized(delta), guess) {
            Ok(out) => Ok(self.accept(state, mesh, matrices, out.alpha, out.beta, out.iterations, false)),
            Err(s) => Err(self.failure(state, &s, format!("regularized solve failed: {}", s.reason))),
        }
    }

    /// Exact step solved from an arbitrary Newton guess.
    pub fn step_from_guess(&self, state: &SolverState, guess: (Vec<f64>, Vec<f64>)) -> Result<SolverState> {
        let (mesh, matrices, tau) = self.next_snapshot(state)?;
        let sys = self.system(&matrices, state, tau);
        match self.solve(&sys, Nonlinearity::Exact, guess) {
            Ok(out) => Ok(self.accept(state, mesh, matrices, out.alpha, out.beta, out.iterations, false)),
            Err(s) => Err(self.failure(state, &s, s.reason.clone())),
        }
    }
}

/// Outcome of the admissibility check on initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub max_abs: f64,
    /// Lumped mean of `U⁰` at `t = 0`.
    pub mean: f64,
    /// `1 − |mean|`, minimized over the checked times.
    pub mean_margin: f64,
    pub energy: Option<f64>,
    pub failures: Vec<String>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `max|U⁰| ≤ 1`, `|mean| < 1` and finite energy. When `t_end` is
/// given, the mean is also checked against the discrete area at `t_end`.
pub fn validate_initial(
    mesh: &SurfaceMesh,
    family: &SurfaceFamily,
    u0: &FeFunction,
    potential: &PotentialParams,
    t_end: Option<f64>,
) -> Result<AdmissibilityReport> {
    u0.check_bound_to(mesh)?;
    let mut failures = Vec::new();
    let max_abs = u0.max_abs();
    if u0.coefficients.iter().any(|v| !v.is_finite()) {
        failures.push("initial data has non-finite values".to_string());
    } else if max_abs > 1.0 {
        failures.push(format!("max |U0| = {max_abs} exceeds 1"));
    }
    let matrices = SnapshotMatrices::assemble(mesh);
    let mass = matrices.integral(&u0.coefficients);
    let mean = mass / matrices.area();
    let mut mean_margin = 1.0 - mean.abs();
    if let Some(t) = t_end.filter(|&t| t > mesh.time()) {
        let later = advect_mesh(mesh, *family, t)?;
        mean_margin = mean_margin.min(1.0 - (mass / later.area()).abs());
    }
    if !(mean_margin > 0.0) {
        failures.push(format!("lumped mean {mean} is not strictly inside (-1, 1) along the evolution"));
    }
    let energy = if max_abs <= 1.0 {
        crate::diagnostics::gl_energy(mesh, u0, potential).ok().filter(|e| e.is_finite())
    } else {
        None
    };
    if energy.is_none() && failures.is_empty() {
        failures.push("initial energy is not finite".to_string());
    }
    Ok(AdmissibilityReport { max_abs, mean, mean_margin, energy, failures })
}

/// A full trajectory: the stepper, its current state and the reference mass.
#[derive(Debug, Clone)]
pub struct Simulation {
    stepper: Stepper,
    state: SolverState,
    initial_mass: f64,
    mass_scale: f64,
}

impl Simulation {
    /// Validates the parameters and the initial data and assembles step 0.
    pub fn new(mesh: &SurfaceMesh, family: SurfaceFamily, params: SchemeParams, u0: FeFunction) -> Result<Self> {
        let stepper = Stepper::new(mesh, family, params)?;
        let p = stepper.params();
        let report = validate_initial(mesh, &family, &u0, &p.potential, Some(p.t_end))?;
        if !report.passed() {
            return Err(Error::Admissibility(report.failures.join("; ")));
        }
        for msg in p.warnings(mesh.h()) {
            warn!("{msg}");
        }
        let state = stepper.initial_state(mesh, u0)?;
        let initial_mass = state.mass();
        let mass_scale = initial_mass.abs().max(state.matrices.area());
        Ok(Simulation { stepper, state, initial_mass, mass_scale })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    pub fn params(&self) -> &SchemeParams {
        self.stepper.params()
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.params().step_count()
    }

    /// Relative drift of the lumped mass from step 0.
    pub fn mass_drift(&self) -> f64 {
        (self.state.mass() - self.initial_mass).abs() / self.mass_scale
    }

    pub fn record(&self) -> Result<DiagnosticsRecord> {
        let s = &self.state;
        DiagnosticsRecord::measure(
            s.step,
            &s.mesh,
            &s.matrices,
            &s.u,
            &self.params().potential,
            &self.stepper.family(),
            s.stats.last_iters,
        )
    }

    pub fn step(&mut self) -> Result<()> {
        self.state = self.stepper.newton_step(&self.state)?;
        let drift = self.mass_drift();
        if drift > 1e-10 {
            warn!("step {}: lumped mass drifted by {drift:.3e} (relative)", self.state.step);
        }
        Ok(())
    }

    /// Steps to `t_end`, handing the initial and every accepted state to
    /// `observer`. Returns the records; on failure the error carries the
    /// step payload and the observer has seen every accepted step.
    pub fn run<F>(&mut self, mut observer: F) -> Result<Vec<DiagnosticsRecord>>
    where
        F: FnMut(&SolverState, &DiagnosticsRecord) -> Result<()>,
    {
        let mut records = Vec::with_capacity(self.params().step_count() + 1 - self.state.step);
        let first = self.record()?;
        observer(&self.state, &first)?;
        records.push(first);
        while !self.is_finished() {
            self.step()?;
            let rec = self.record()?;
            observer(&self.state, &rec)?;
            records.push(rec);
        }
        Ok(records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_icosphere, make_torus_mesh};
    use crate::operators::interpolate;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sphere_setup(level: u32, theta: f64, eps: f64, tau: f64, t_end: f64) -> (SurfaceMesh, SchemeParams) {
        let mesh = make_icosphere(level, SurfaceFamily::unit_sphere()).unwrap();
        let params = SchemeParams::new(PotentialParams::new(theta, eps).unwrap(), tau, t_end);
        (mesh, params)
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let (mesh, params) = sphere_setup(2, 0.4, 0.1, 1e-3, 1e-3);
        let stepper = Stepper::new(&mesh, SurfaceFamily::unit_sphere(), params).unwrap();
        let s0 = stepper.initial_state(&mesh, FeFunction::constant(0.0, &mesh)).unwrap();
        let s1 = stepper.newton_step(&s0).unwrap();
        assert!(s1.u.coefficients.iter().all(|&v| v == 0.0));
        assert!(s1.w.coefficients.iter().all(|&v| v == 0.0));
        assert_eq!(s1.stats.last_iters, 1);
        let reg = stepper.regularized_step(&s0, 0.5).unwrap();
        assert!(reg.u.coefficients.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constants_are_equilibria() {
        let (mesh, params) = sphere_setup(2, 0.4, 0.1, 1e-3, 1e-3);
        let stepper = Stepper::new(&mesh, SurfaceFamily::unit_sphere(), params).unwrap();
        let c = 0.3;
        let s0 = stepper.initial_state(&mesh, FeFunction::constant(c, &mesh)).unwrap();
        let s1 = stepper.newton_step(&s0).unwrap();
        let w = 0.4 / 0.2 * f_log(c).unwrap() - c / 0.1;
        for (u, wv) in s1.u.coefficients.iter().zip(&s1.w.coefficients) {
            assert!((u - c).abs() < 1e-12);
            assert!((wv - w).abs() < 1e-9);
        }
        // W⁰ from the second row already equals the chemical potential
        for wv in &s0.w.coefficients {
            assert!((wv - w).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_matches_dense_oracle() {
        let (mesh, params) = sphere_setup(2, 0.4, 0.1, 1e-3, 1e-3);
        let matrices = SnapshotMatrices::assemble(&mesh);
        let n = mesh.vertex_count();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let prev: Vec<f64> = (0..n).map(|_| rng.random_range(-0.9..0.9)).collect();
        let rhs: Vec<f64> = prev.iter().zip(&matrices.lumped).map(|(v, m)| v * m).collect();
        let sys = StepSystem {
            lumped: &matrices.lumped,
            stiffness: &matrices.stiffness,
            rhs_cache: &rhs,
            tau: 1e-3,
            potential: params.potential,
        };
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-0.95..0.95)).collect();
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let r = sys.residual(&alpha, &beta, Nonlinearity::Exact).unwrap();

        let a = matrices.stiffness.to_dense();
        let m = DMatrix::from_diagonal(&DVector::from_vec(matrices.lumped.clone()));
        let av = DVector::from_vec(alpha.clone());
        let bv = DVector::from_vec(beta.clone());
        let fv = DVector::from_iterator(n, alpha.iter().map(|&x| ((1.0 + x) / (1.0 - x)).ln()));
        let r1 = &m * &av + 1e-3 * &a * &bv - DVector::from_vec(rhs.clone());
        let r2 = (-0.1 * &a + &m / 0.1) * &av + &m * &bv - (0.4 / 0.2) * &m * fv;
        for i in 0..n {
            assert!((r[i] - r1[i]).abs() < 1e-12, "row1 {i}");
            assert!((r[n + i] - r2[i]).abs() < 1e-12 * r2[i].abs().max(1.0), "row2 {i}");
        }
        let outside = vec![1.0; n];
        assert!(matches!(sys.residual(&outside, &beta, Nonlinearity::Exact), Err(Error::Feasibility(_))));
        assert!(sys.residual(&outside, &beta, Nonlinearity::Regularized(0.01)).is_ok());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let (mesh, params) = sphere_setup(2, 0.4, 0.1, 1e-3, 1e-3);
        let matrices = SnapshotMatrices::assemble(&mesh);
        let n = mesh.vertex_count();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rhs = vec![0.0; n];
        let sys = StepSystem {
            lumped: &matrices.lumped,
            stiffness: &matrices.stiffness,
            rhs_cache: &rhs,
            tau: 1e-3,
            potential: params.potential,
        };
        for nl in [Nonlinearity::Exact, Nonlinearity::Regularized(0.01)] {
            for _ in 0..5 {
                let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-0.9..0.9)).collect();
                let beta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let da: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let db: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let h = 1e-6;
                let shift = |s: f64| {
                    let a: Vec<f64> = alpha.iter().zip(&da).map(|(x, d)| x + s * d).collect();
                    let b: Vec<f64> = beta.iter().zip(&db).map(|(x, d)| x + s * d).collect();
                    sys.residual(&a, &b, nl).unwrap()
                };
                let (plus, minus) = (shift(h), shift(-h));
                let fd: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect();
                let jv = sys.jacobian_apply(&alpha, nl, &da, &db).unwrap();
                let diff: Vec<f64> = fd.iter().zip(&jv).map(|(a, b)| a - b).collect();
                assert!(norm(&diff) <= 1e-6 * norm(&jv), "{}", norm(&diff) / norm(&jv));
            }
        }
    }

    #[test]
    fn torus_step_conserves_mass() {
        let family = SurfaceFamily::ExpandingTorus;
        let mesh = make_torus_mesh(24, 12, family).unwrap();
        let params = SchemeParams::new(PotentialParams::new(0.4, 0.1).unwrap(), 5e-4, 2e-3);
        let u0 = interpolate(&mesh, |x| 0.9 * x.x * (std::f64::consts::PI * x.y / 2.0).cos()).unwrap();
        let mut sim = Simulation::new(&mesh, family, params, u0).unwrap();
        let records = sim.run(|_, _| Ok(())).unwrap();
        assert_eq!(records.len(), 5);
        let scale = sim.state().matrices.area();
        for r in &records {
            assert!((r.mass - records[0].mass).abs() <= 1e-10 * scale);
            assert!(r.max_abs_u <= 1.0 - 1e-9);
        }
    }

    #[test]
    fn admissibility_examples() {
        let family = SurfaceFamily::unit_sphere();
        let (mesh, params) = sphere_setup(2, 0.4, 0.1, 1e-3, 0.0);
        let zero = validate_initial(&mesh, &family, &FeFunction::constant(0.0, &mesh), &params.potential, None).unwrap();
        assert!(zero.passed());
        assert_eq!(zero.mean_margin, 1.0);
        let one = validate_initial(&mesh, &family, &FeFunction::constant(1.0, &mesh), &params.potential, None).unwrap();
        assert!(!one.passed());
        let sim = Simulation::new(&mesh, family, params.clone(), FeFunction::constant(1.0, &mesh));
        assert!(matches!(sim, Err(Error::Admissibility(_))));

        let mut sim = Simulation::new(&mesh, family, params, FeFunction::constant(0.2, &mesh)).unwrap();
        assert_eq!(sim.run(|_, _| Ok(())).unwrap().len(), 1);

        let torus = make_torus_mesh(64, 47, SurfaceFamily::ExpandingTorus).unwrap();
        let u0 = interpolate(&torus, |x| 0.9 * x.x * (std::f64::consts::PI * x.y / 2.0).cos()).unwrap();
        let rep = validate_initial(&torus, &SurfaceFamily::ExpandingTorus, &u0, &PotentialParams::new(0.4, 0.1).unwrap(), Some(0.6)).unwrap();
        assert!(rep.passed());
        assert!(rep.max_abs <= 0.9 + 1e-12);
    }

    #[test]
    fn step_schedule() {
        let p = SchemeParams::new(PotentialParams::new(0.4, 0.1).unwrap(), 5e-5, 0.6);
        assert_eq!(p.step_count(), 12000);
        assert_eq!(p.time_of(12000), 0.6);
        let q = SchemeParams::new(PotentialParams::new(0.4, 0.1).unwrap(), 0.3, 1.0);
        assert_eq!(q.step_count(), 4);
        assert_eq!(q.time_of(4), 1.0);
        assert_eq!(SchemeParams { t_end: 0.0, ..q.clone() }.step_count(), 0);
        assert_eq!(q.warnings(1.0).len(), 2);
        assert!(SchemeParams { tau: 0.0, ..q }.validate().is_err());
    }
}
