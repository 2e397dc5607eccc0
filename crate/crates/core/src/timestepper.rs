//! θ-scheme time marching with Newton iteration for the penalty term.
//!
//! One step solves
//! `(I − θΔτA)V − θΔτG(V) = (I + (1−θ)ΔτA)V^m + (1−θ)ΔτG(V^m) + Δτ(θF^{m+1} + (1−θ)F^m)`.

use std::io::Write;

use crate::assembly::{assemble_operator, SchemeSelector, StencilOperator};
use crate::error::{PricerError, Result};
use crate::grid::Grid2D;
use crate::linalg::{bicgstab, BandedLu, CsrMatrix, DiagonallyShifted, Ilu0, LinearOperator, Preconditioner};
use crate::model::{payoff_surface, PenaltyParams, ProblemSpec};
use crate::scalar::{max_abs, Real};
use crate::surface::PriceSurface;

/// Uniform time levels `τ_m = m Δτ`, `Δτ = T / M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<S> {
    pub steps: usize,
    pub maturity: S,
}

impl<S: Real> TimeGrid<S> {
    pub fn new(steps: usize, maturity: S) -> Result<Self> {
        if steps == 0 {
            return Err(PricerError::InvalidParameter("need at least one time step".into()));
        }
        if !(maturity > S::zero()) {
            return Err(PricerError::InvalidParameter(format!("maturity must be positive, got {maturity}")));
        }
        Ok(Self { steps, maturity })
    }

    pub fn dt(&self) -> S {
        self.maturity / S::from_usize_lossy(self.steps)
    }

    /// `τ_m`; the last level is exactly `T`.
    pub fn level(&self, m: usize) -> S {
        if m == self.steps {
            self.maturity
        } else {
            self.maturity * S::from_usize_lossy(m) / S::from_usize_lossy(self.steps)
        }
    }
}

/// How each linear system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolverKind {
    /// Direct for `N <= 128`, Krylov above.
    Auto,
    /// Banded LU of the step matrix, reused as preconditioner once the penalty is active.
    Direct,
    /// BiCGSTAB with ILU(0).
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings<S> {
    pub theta: S,
    pub newton_tol: S,
    pub newton_max_iter: usize,
    pub linear_tol: S,
    pub linear_max_iter: usize,
    pub linear_solver: LinearSolverKind,
}

impl<S: Real> Default for SolverSettings<S> {
    fn default() -> Self {
        Self {
            theta: S::half(),
            newton_tol: S::lit(1e-9),
            newton_max_iter: 50,
            linear_tol: S::lit(1e-10),
            linear_max_iter: 2000,
            linear_solver: LinearSolverKind::Auto,
        }
    }
}

impl<S: Real> SolverSettings<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= S::zero() && self.theta <= S::one()) {
            return Err(PricerError::InvalidParameter(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.newton_tol > S::zero()) || !(self.linear_tol > S::zero()) {
            return Err(PricerError::InvalidParameter("tolerances must be positive".into()));
        }
        if self.newton_max_iter == 0 || self.linear_max_iter == 0 {
            return Err(PricerError::InvalidParameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// `max_ε(s) = ½(s + √(s² + ε²))`, the plain positive part for `ε = 0`.
#[inline]
fn smoothed_max<S: Real>(s: S, eps: S) -> S {
    if eps == S::zero() {
        s.max(S::zero())
    } else {
        S::half() * (s + (s * s + eps * eps).sqrt())
    }
}

#[inline]
fn smoothed_max_derivative<S: Real>(s: S, eps: S) -> S {
    if eps == S::zero() {
        if s > S::zero() {
            S::one()
        } else {
            S::zero()
        }
    } else {
        S::half() * (S::one() + s / (s * s + eps * eps).sqrt())
    }
}

fn check_lengths<S>(v: &[S], payoff: &[S]) -> Result<()> {
    if v.len() != payoff.len() {
        return Err(PricerError::InvalidParameter(format!(
            "state has {} entries, payoff has {}",
            v.len(),
            payoff.len()
        )));
    }
    Ok(())
}

/// `G(V) = β max_ε(V* − V)^{1/k}` componentwise.
pub fn penalty_term<S: Real>(v: &[S], payoff: &[S], penalty: &PenaltyParams<S>) -> Result<Vec<S>> {
    penalty.validate()?;
    check_lengths(v, payoff)?;
    let p = penalty.exponent();
    Ok(v.iter()
        .zip(payoff)
        .map(|(&vi, &pi)| {
            if penalty.beta == S::zero() {
                S::zero()
            } else {
                penalty.beta * smoothed_max(pi - vi, penalty.epsilon).powf(p)
            }
        })
        .collect())
}

/// `∂G_i/∂V_i = −β p max_ε(V* − V)^{p−1} max_ε'(V* − V)` (nonpositive).
pub fn penalty_jacobian_diag<S: Real>(v: &[S], payoff: &[S], penalty: &PenaltyParams<S>) -> Result<Vec<S>> {
    penalty.validate()?;
    check_lengths(v, payoff)?;
    let p = penalty.exponent();
    if p < S::one() && penalty.epsilon == S::zero() && penalty.beta > S::zero() {
        return Err(PricerError::NonLipschitzPenalty { exponent: p.as_f64() });
    }
    Ok(v.iter()
        .zip(payoff)
        .map(|(&vi, &pi)| {
            if penalty.beta == S::zero() {
                return S::zero();
            }
            let s = pi - vi;
            let m = smoothed_max(s, penalty.epsilon);
            let dm = smoothed_max_derivative(s, penalty.epsilon);
            if dm == S::zero() {
                return S::zero();
            }
            -penalty.beta * p * m.powf(p - S::one()) * dm
        })
        .collect())
}

/// One line of the per-step diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics<S> {
    pub step: usize,
    pub newton_iterations: usize,
    pub residual: S,
    pub min_excess: S,
}

impl<S: Real> StepDiagnostics<S> {
    /// Tab-separated `step, iterations, residual, min(V − payoff)`.
    pub fn line(&self) -> String {
        format!("{}\t{}\t{:e}\t{:e}", self.step, self.newton_iterations, self.residual.as_f64(), self.min_excess.as_f64())
    }
}

/// Receives one record per completed step.
pub trait DiagnosticsSink<S> {
    fn record(&mut self, d: &StepDiagnostics<S>);
}

impl<S: Real> DiagnosticsSink<S> for Vec<StepDiagnostics<S>> {
    fn record(&mut self, d: &StepDiagnostics<S>) {
        self.push(*d);
    }
}

/// Writes the tab-separated stream to any writer; write errors are ignored.
pub struct TsvDiagnostics<W: Write>(pub W);

impl<S: Real, W: Write> DiagnosticsSink<S> for TsvDiagnostics<W> {
    fn record(&mut self, d: &StepDiagnostics<S>) {
        let _ = writeln!(self.0, "{}", d.line());
    }
}

enum BaseSolver<S> {
    Lu(BandedLu<S>),
    Ilu(Ilu0<S>),
}

impl<S: Real> Preconditioner<S> for BaseSolver<S> {
    fn apply(&self, r: &[S], z: &mut [S]) {
        match self {
            BaseSolver::Lu(lu) => lu.apply(r, z),
            BaseSolver::Ilu(ilu) => ilu.apply(r, z),
        }
    }
}

/// Fixed-matrix part of a step: `I − θΔτA`, `I + (1−θ)ΔτA` and the solver for the former.
pub struct StepSystem<S> {
    pub dt: S,
    pub theta: S,
    a: CsrMatrix<S>,
    lhs: CsrMatrix<S>,
    base: BaseSolver<S>,
    settings: SolverSettings<S>,
}

impl<S: Real> StepSystem<S> {
    pub fn new(a: &CsrMatrix<S>, dt: S, settings: &SolverSettings<S>) -> Result<Self> {
        settings.validate()?;
        let a = a.with_diagonal();
        let theta = settings.theta;
        let lhs = a.shifted(S::one(), -theta * dt);
        let n = (a.dim() as f64).sqrt().round() as usize;
        let direct = match settings.linear_solver {
            LinearSolverKind::Direct => true,
            LinearSolverKind::Krylov => false,
            LinearSolverKind::Auto => n <= 128,
        };
        let base = if direct { BaseSolver::Lu(BandedLu::factor(&lhs)?) } else { BaseSolver::Ilu(Ilu0::factor(&lhs)?) };
        Ok(Self { dt, theta, a, lhs, base, settings: *settings })
    }

    /// Solves `(I − θΔτA + diag(shift)) x = b`, with `x` holding the initial guess.
    fn solve(&self, shift: Option<&[S]>, b: &[S], x: &mut [S]) -> Result<()> {
        match (&self.base, shift) {
            (BaseSolver::Lu(lu), None) => {
                x.copy_from_slice(b);
                lu.solve_in_place(x);
                Ok(())
            }
            (_, None) => bicgstab(&self.lhs, &self.base, b, x, self.settings.linear_tol, self.settings.linear_max_iter)
                .map(|_| ()),
            (_, Some(shift)) => {
                let op = DiagonallyShifted { base: &self.lhs, shift };
                bicgstab(&op, &self.base, b, x, self.settings.linear_tol, self.settings.linear_max_iter).map(|_| ())
            }
        }
    }

    /// Advances one step; returns `V^{m+1}` and its diagnostics (with `step` left at 0).
    pub fn step(
        &self,
        v_m: &[S],
        f_m: &[S],
        f_next: &[S],
        penalty: &PenaltyParams<S>,
        payoff: &[S],
    ) -> Result<(Vec<S>, StepDiagnostics<S>)> {
        self.step_traced(v_m, f_m, f_next, penalty, payoff, None)
    }

    /// As [`StepSystem::step`], additionally pushing the residual norm before
    /// each Newton update and after the last one into `history`.
    pub fn step_traced(
        &self,
        v_m: &[S],
        f_m: &[S],
        f_next: &[S],
        penalty: &PenaltyParams<S>,
        payoff: &[S],
        history: Option<&mut Vec<S>>,
    ) -> Result<(Vec<S>, StepDiagnostics<S>)> {
        let n = v_m.len();
        let (dt, theta) = (self.dt, self.theta);
        let explicit = S::one() - theta;
        let av = self.a.matvec(v_m);
        let g_m = penalty_term(v_m, payoff, penalty)?;
        let rhs: Vec<S> = (0..n)
            .map(|k| v_m[k] + explicit * dt * (av[k] + g_m[k]) + dt * (theta * f_next[k] + explicit * f_m[k]))
            .collect();

        let mut v = v_m.to_vec();
        let (iterations, residual) = if penalty.beta == S::zero() {
            self.solve(None, &rhs, &mut v)?;
            let mut lv = vec![S::zero(); n];
            self.lhs.apply(&v, &mut lv);
            let r = lv.iter().zip(&rhs).map(|(a, b)| (*a - *b).abs()).fold(S::zero(), S::max);
            (1, r)
        } else {
            self.newton(&rhs, penalty, payoff, &mut v, history)?
        };
        let min_excess = v.iter().zip(payoff).map(|(a, b)| *a - *b).fold(S::infinity(), S::min);
        Ok((v, StepDiagnostics { step: 0, newton_iterations: iterations, residual, min_excess }))
    }

    fn residual(&self, v: &[S], rhs: &[S], penalty: &PenaltyParams<S>, payoff: &[S]) -> Result<Vec<S>> {
        let scale = self.theta * self.dt;
        let g = penalty_term(v, payoff, penalty)?;
        let mut r = vec![S::zero(); v.len()];
        self.lhs.apply(v, &mut r);
        for k in 0..r.len() {
            r[k] = r[k] - scale * g[k] - rhs[k];
        }
        Ok(r)
    }

    fn newton(
        &self,
        rhs: &[S],
        penalty: &PenaltyParams<S>,
        payoff: &[S],
        v: &mut [S],
        mut history: Option<&mut Vec<S>>,
    ) -> Result<(usize, S)> {
        let scale = self.theta * self.dt;
        let tol = self.settings.newton_tol;
        let mut r = self.residual(v, rhs, penalty, payoff)?;
        let mut rnorm = max_abs(&r);
        for it in 0..=self.settings.newton_max_iter {
            if let Some(h) = history.as_deref_mut() {
                h.push(rnorm);
            }
            if rnorm <= tol * (S::one() + max_abs(v)) {
                return Ok((it, rnorm));
            }
            if it == self.settings.newton_max_iter || !rnorm.is_finite() {
                break;
            }
            let jd = penalty_jacobian_diag(v, payoff, penalty)?;
            let shift: Vec<S> = jd.iter().map(|d| -scale * *d).collect();
            let mut delta = vec![S::zero(); v.len()];
            self.solve(Some(&shift), &r, &mut delta)?;
            for (vi, di) in v.iter_mut().zip(&delta) {
                *vi = *vi - *di;
            }
            r = self.residual(v, rhs, penalty, payoff)?;
            rnorm = max_abs(&r);
        }
        Err(PricerError::NewtonDiverged { iterations: self.settings.newton_max_iter, residual: rnorm.as_f64() })
    }
}

/// Everything produced by a full time march.
#[derive(Debug, Clone)]
pub struct Solution<S> {
    pub surface: PriceSurface<S>,
    pub diagnostics: Vec<StepDiagnostics<S>>,
}

/// Boundary vector `F(τ)` for a fixed operator.
pub(crate) struct BoundaryData<'a, S> {
    couplings: Vec<Vec<((usize, usize), S)>>,
    grid: &'a Grid2D<S>,
    spec: &'a ProblemSpec<S>,
}

impl<'a, S: Real> BoundaryData<'a, S> {
    pub(crate) fn new(op: &StencilOperator<S>, grid: &'a Grid2D<S>, spec: &'a ProblemSpec<S>) -> Self {
        Self { couplings: op.boundary_couplings(), grid, spec }
    }

    pub(crate) fn at(&self, tau: S) -> Vec<S> {
        self.couplings
            .iter()
            .map(|c| {
                c.iter()
                    .map(|&((i, j), w)| {
                        let [x, y] = self.grid.node(i, j);
                        w * self.spec.boundary_node_value(x, y, tau)
                    })
                    .sum()
            })
            .collect()
    }
}

/// Marches from the payoff at `τ = 0` to `τ = T` with an already assembled operator.
pub fn march<S: Real>(
    spec: &ProblemSpec<S>,
    op: &StencilOperator<S>,
    grid: &Grid2D<S>,
    time: &TimeGrid<S>,
    settings: &SolverSettings<S>,
    mut sink: Option<&mut dyn DiagnosticsSink<S>>,
) -> Result<Solution<S>> {
    let system = StepSystem::new(&op.to_csr(), time.dt(), settings)?;
    let penalty = spec.effective_penalty();
    let initial = payoff_surface(spec, grid);
    let payoff = initial.interior();
    let boundary = BoundaryData::new(op, grid, spec);
    let mut v = payoff.clone();
    let mut f_m = boundary.at(time.level(0));
    let mut diagnostics = Vec::with_capacity(time.steps);
    for m in 0..time.steps {
        let f_next = boundary.at(time.level(m + 1));
        let (next, mut d) = system
            .step(&v, &f_m, &f_next, &penalty, &payoff)
            .map_err(|e| PricerError::StepFailed { step: m + 1, source: Box::new(e) })?;
        d.step = m + 1;
        if let Some(s) = sink.as_deref_mut() {
            s.record(&d);
        }
        diagnostics.push(d);
        v = next;
        f_m = f_next;
    }
    let tau = time.maturity;
    let surface = PriceSurface::from_interior(grid, &v, tau, spec.payoff.name(), |x, y| {
        spec.boundary_node_value(x, y, tau)
    });
    Ok(Solution { surface, diagnostics })
}

/// Assembles the scheme and marches to maturity.
pub fn solve<S: Real>(
    spec: &ProblemSpec<S>,
    scheme: SchemeSelector,
    grid: &Grid2D<S>,
    time: &TimeGrid<S>,
    settings: &SolverSettings<S>,
    sink: Option<&mut dyn DiagnosticsSink<S>>,
) -> Result<Solution<S>> {
    spec.check_against(grid)?;
    let op = assemble_operator(scheme, grid, spec)?;
    march(spec, &op, grid, time, settings, sink)
}
