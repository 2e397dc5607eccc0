//! Fitted fluxes for the degenerate strips next to `x = 0` and `y = 0`, and the
//! exponentially fitted two-point scheme used as a baseline.
//!
//! On `(0, x_1)` the `x`-flux `x(a x V_x + b V)` is assumed constant, which makes
//! the local solution linear between `x_0 = 0` and `x_1`. The resulting edge
//! flux at `x_{1/2}` has weights on `V_{0j}`, `V_{1j}` and, through the mixed
//! derivative, on `V_{1,j+1}`.

use crate::assembly::{diffusion_row, TransmissibilityField};
use crate::error::{PricerError, Result};
use crate::grid::Grid2D;
use crate::model::{ConvectionField, MarketParams};
use crate::scalar::Real;
use crate::stencil::{Offset, StencilRow};
use crate::upwind::{convection_row, FaceMask, UpwindOrder};

/// Weights of the fitted flux through one degenerate edge, in the positive
/// coordinate direction.
///
/// For the western edge of `C_{1j}`: `boundary` multiplies `V_{0j}`, `first`
/// multiplies `V_{1j}` and `diagonal` multiplies `V_{1,j+1}`. For the southern
/// edge of `C_{i1}` the roles are `V_{i0}`, `V_{i1}`, `V_{i+1,1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedEdgeFlux<S> {
    pub boundary: S,
    pub first: S,
    pub diagonal: S,
}

impl<S: Real> FittedEdgeFlux<S> {
    /// Flux for the given values.
    pub fn evaluate(&self, boundary: S, first: S, diagonal: S) -> S {
        self.boundary * boundary + self.first * first + self.diagonal * diagonal
    }
}

/// `(a, b)` of the `x`-direction flux `a x² V_x + b x V`.
fn x_coefficients<S: Real>(m: &MarketParams<S>) -> (S, S) {
    let f = ConvectionField::from_market(m);
    (S::half() * m.sigma1 * m.sigma1, f.cx)
}

fn y_coefficients<S: Real>(m: &MarketParams<S>) -> (S, S) {
    let f = ConvectionField::from_market(m);
    (S::half() * m.sigma2 * m.sigma2, f.cy)
}

/// Fitted flux through the western edge `x = x_{1/2}` of `C_{1j}`, `1 <= j <= N`.
pub fn fitted_west_flux<S: Real>(market: &MarketParams<S>, grid: &Grid2D<S>, j: usize) -> FittedEdgeFlux<S> {
    let (a, b) = x_coefficients(market);
    let d = market.half_cross() * grid.y.node(j);
    let xf = grid.x.east_face(0);
    let lj = grid.y.width(j);
    let dy = grid.y.node(j + 1) - grid.y.node(j);
    let cross = xf * d * lj / dy;
    FittedEdgeFlux {
        boundary: -S::half() * xf * lj * (a - b),
        first: xf * S::half() * lj * (a + b) - cross,
        diagonal: cross,
    }
}

/// Fitted flux through the southern edge `y = y_{1/2}` of `C_{i1}`, `1 <= i <= N`.
pub fn fitted_south_flux<S: Real>(market: &MarketParams<S>, grid: &Grid2D<S>, i: usize) -> FittedEdgeFlux<S> {
    let (e, k) = y_coefficients(market);
    let h = market.half_cross() * grid.x.node(i);
    let yf = grid.y.east_face(0);
    let hi = grid.x.width(i);
    let dx = grid.x.node(i + 1) - grid.x.node(i);
    let cross = yf * h * hi / dx;
    FittedEdgeFlux {
        boundary: -S::half() * yf * hi * (e - k),
        first: yf * S::half() * hi * (e + k) - cross,
        diagonal: cross,
    }
}

/// Outward contribution `-flux` of a west/south fitted edge to the cell balance.
fn add_fitted_edge<S: Real>(row: &mut StencilRow<S>, flux: &FittedEdgeFlux<S>, normal: Offset, tangent: Offset) {
    row.add((-normal.0, -normal.1), -flux.boundary);
    row.add((0, 0), -flux.first);
    row.add(tangent, -flux.diagonal);
}

/// Flux balance (diffusion and convection, no reaction) of a cell in the
/// degenerate band `i = 1` or `j = 1`, with the degenerate edges fitted.
pub fn fitted_row<S: Real>(
    grid: &Grid2D<S>,
    market: &MarketParams<S>,
    transmissibilities: &TransmissibilityField<S>,
    order: UpwindOrder,
    i: usize,
    j: usize,
) -> Result<StencilRow<S>> {
    if !grid.is_interior(i, j) || (i != 1 && j != 1) {
        return Err(PricerError::NotInDegenerateBand { i, j });
    }
    let faces = FaceMask { west: i != 1, south: j != 1, east: true, north: true };
    let field = ConvectionField::from_market(market);
    let mut row = diffusion_row(transmissibilities, i, j, faces);
    row.add_scaled(&convection_row(grid, &field, order, i, j, faces), S::one());
    if i == 1 {
        add_fitted_edge(&mut row, &fitted_west_flux(market, grid, j), (1, 0), (0, 1));
    }
    if j == 1 {
        add_fitted_edge(&mut row, &fitted_south_flux(market, grid, i), (0, 1), (1, 0));
    }
    Ok(row.pruned())
}

/// `α / expm1(α L)` with its `1/L` limit.
fn fitting_factor<S: Real>(alpha: S, log_ratio: S) -> S {
    let z = alpha * log_ratio;
    if z.abs() < S::lit(1e-12) {
        S::one() / log_ratio
    } else {
        alpha / z.exp_m1()
    }
}

/// Positive-direction flux through the face between nodes `p` and `p + 1` of a
/// 1D axis, for `a s² V' + b s V` with the flux held constant on the interval.
/// Returns weights on `(V_p, V_{p+1})` per unit face length.
fn fitted_two_point<S: Real>(a: S, b: S, nodes: &[S], p: usize, face: S) -> (S, S) {
    let (s0, s1) = (nodes[p], nodes[p + 1]);
    if p == 0 {
        return (-S::half() * face * (a - b), S::half() * face * (a + b));
    }
    if a <= S::zero() {
        return if b >= S::zero() { (S::zero(), face * b) } else { (face * b, S::zero()) };
    }
    let log_ratio = (s1 / s0).ln();
    let alpha = b / a;
    let g = a * fitting_factor(alpha, log_ratio) * face;
    (-g, g * (alpha * log_ratio).exp())
}

/// Face flux of the fitted two-point scheme between `(p, q)` and the next node
/// along `dir`, as a stencil relative to `(p, q)`.
fn ffv_face<S: Real>(grid: &Grid2D<S>, market: &MarketParams<S>, p: usize, q: usize, dir: Offset) -> StencilRow<S> {
    let mut row = StencilRow::new();
    let hc = market.half_cross();
    let (along, across, (a, b), len, cross_coef, d_across, tangent) = if dir == (1, 0) {
        let len = grid.y.width(q);
        let dy = grid.y.node(q + 1) - grid.y.node(q);
        (&grid.x, p, x_coefficients(market), len, hc * grid.y.node(q), dy, (0, 1))
    } else {
        let len = grid.x.width(p);
        let dx = grid.x.node(p + 1) - grid.x.node(p);
        (&grid.y, q, y_coefficients(market), len, hc * grid.x.node(p), dx, (1, 0))
    };
    let face = along.east_face(across);
    let (w0, w1) = fitted_two_point(a, b, along.nodes(), across, face);
    row.add((0, 0), w0 * len);
    row.add(dir, w1 * len);
    // mixed derivative by a forward difference along the face on the far side
    let c = face * cross_coef * len / d_across;
    row.add(dir, -c);
    row.add((dir.0 + tangent.0, dir.1 + tangent.1), c);
    row
}

/// Flux balance (no reaction) of cell `(i, j)` for the fitted two-point scheme.
pub fn ffv_row<S: Real>(grid: &Grid2D<S>, market: &MarketParams<S>, i: usize, j: usize) -> StencilRow<S> {
    let mut row = StencilRow::new();
    let mut add = |face: StencilRow<S>, shift: Offset, sign: S| {
        for &((di, dj), w) in face.entries() {
            row.add((di + shift.0, dj + shift.1), sign * w);
        }
    };
    add(ffv_face(grid, market, i, j, (1, 0)), (0, 0), S::one());
    add(ffv_face(grid, market, i - 1, j, (1, 0)), (-1, 0), -S::one());
    add(ffv_face(grid, market, i, j, (0, 1)), (0, 0), S::one());
    add(ffv_face(grid, market, i, j - 1, (0, 1)), (0, -1), -S::one());
    row.pruned()
}
