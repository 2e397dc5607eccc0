//! Projected SOR for the linear complementarity form of the American problem.
//!
//! Each θ-step solves `B x ≥ b`, `x ≥ V*`, `(B x − b)·(x − V*) = 0` with
//! `B = I − θΔτA`. Used as an independent check of the penalty solution.

use crate::assembly::StencilOperator;
use crate::error::{PricerError, Result};
use crate::grid::Grid2D;
use crate::linalg::CsrMatrix;
use crate::model::{payoff_surface, ProblemSpec};
use crate::scalar::Real;
use crate::surface::PriceSurface;
use crate::timestepper::{BoundaryData, TimeGrid};

/// Stopping rule and relaxation factor of projected SOR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorSettings<S> {
    pub omega: S,
    /// Largest update of a sweep, relative to `1 + ‖x‖∞`.
    pub tol: S,
    pub max_sweeps: usize,
}

impl<S: Real> Default for PsorSettings<S> {
    fn default() -> Self {
        Self { omega: S::lit(1.2), tol: S::lit(1e-12), max_sweeps: 100_000 }
    }
}

/// Projected Gauss–Seidel with over-relaxation; `x` is the initial guess and
/// the result. Returns the number of sweeps.
pub fn psor<S: Real>(b: &CsrMatrix<S>, rhs: &[S], lower: &[S], x: &mut [S], settings: &PsorSettings<S>) -> Result<usize> {
    let n = b.dim();
    if rhs.len() != n || lower.len() != n || x.len() != n {
        return Err(PricerError::InvalidParameter("psor: dimension mismatch".into()));
    }
    if !(settings.omega > S::zero() && settings.omega < S::two()) {
        return Err(PricerError::InvalidParameter(format!("psor: omega {} outside (0, 2)", settings.omega)));
    }
    let diag = b.diagonal();
    if let Some(k) = diag.iter().position(|d| *d <= S::zero()) {
        return Err(PricerError::LinearSolver(format!("psor: non-positive diagonal in row {k}")));
    }
    for (xi, li) in x.iter_mut().zip(lower) {
        *xi = xi.max(*li);
    }
    for sweep in 1..=settings.max_sweeps {
        let mut change = S::zero();
        for r in 0..n {
            let mut off = S::zero();
            for (c, v) in b.row(r) {
                if c != r {
                    off = off + v * x[c];
                }
            }
            let gs = (rhs[r] - off) / diag[r];
            let next = (x[r] + settings.omega * (gs - x[r])).max(lower[r]);
            change = change.max((next - x[r]).abs());
            x[r] = next;
        }
        let scale = S::one() + x.iter().fold(S::zero(), |m, v| m.max(v.abs()));
        if !change.is_finite() {
            break;
        }
        if change <= settings.tol * scale {
            return Ok(sweep);
        }
    }
    Err(PricerError::LinearSolver(format!("psor: no convergence in {} sweeps", settings.max_sweeps)))
}

/// θ-scheme march of the complementarity problem with the same operator,
/// boundary data and initial condition as the penalty solver.
pub fn march_lcp<S: Real>(
    spec: &ProblemSpec<S>,
    op: &StencilOperator<S>,
    grid: &Grid2D<S>,
    time: &TimeGrid<S>,
    theta: S,
    settings: &PsorSettings<S>,
) -> Result<PriceSurface<S>> {
    let a = op.to_csr().with_diagonal();
    let dt = time.dt();
    let lhs = a.shifted(S::one(), -theta * dt);
    let explicit = S::one() - theta;
    let payoff = payoff_surface(spec, grid).interior();
    let boundary = BoundaryData::new(op, grid, spec);
    let mut v = payoff.clone();
    let mut f_m = boundary.at(time.level(0));
    for m in 0..time.steps {
        let f_next = boundary.at(time.level(m + 1));
        let av = a.matvec(&v);
        let rhs: Vec<S> = (0..v.len())
            .map(|k| v[k] + explicit * dt * av[k] + dt * (theta * f_next[k] + explicit * f_m[k]))
            .collect();
        psor(&lhs, &rhs, &payoff, &mut v, settings)
            .map_err(|e| PricerError::StepFailed { step: m + 1, source: Box::new(e) })?;
        f_m = f_next;
    }
    let tau = time.maturity;
    Ok(PriceSurface::from_interior(grid, &v, tau, spec.payoff.name(), |x, y| spec.boundary_node_value(x, y, tau)))
}
