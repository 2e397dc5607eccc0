//! Coefficients of the two-asset Black-Scholes PDE in divergence form
//!
//! `V_τ = ∇·(M∇V) + ∇·(fV) + λV + β[V* − V]_+^{1/k}`
//!
//! together with payoffs, Dirichlet data and penalty parameters.

use crate::error::{PricerError, Result};
use crate::grid::{CellBounds, Grid2D};
use crate::reference;
use crate::scalar::Real;
use crate::surface::PriceSurface;

/// Market data shared by both assets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams<S> {
    pub sigma1: S,
    pub sigma2: S,
    pub rho: S,
    pub rate: S,
    pub strike: S,
    pub maturity: S,
}

impl<S: Real> MarketParams<S> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(PricerError::InvalidParameter(what.to_string()));
        if !(self.sigma1 >= S::zero() && self.sigma2 >= S::zero()) {
            return bad("volatilities must be nonnegative");
        }
        if !(self.rho.abs() <= S::one()) {
            return bad("correlation must lie in [-1, 1]");
        }
        if !(self.maturity > S::zero()) {
            return bad("maturity must be positive");
        }
        if !(self.strike > S::zero()) {
            return bad("strike must be positive");
        }
        if !self.rate.is_finite() {
            return bad("rate must be finite");
        }
        Ok(())
    }

    /// `½ρσ₁σ₂`, the half cross-volatility appearing in `M` and `f`.
    #[inline]
    pub fn half_cross(&self) -> S {
        S::half() * self.rho * self.sigma1 * self.sigma2
    }
}

/// Power penalty `β [V* − V]_+^{1/k}` with optional smoothing of the bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams<S> {
    pub beta: S,
    pub k: S,
    pub epsilon: S,
}

impl<S: Real> PenaltyParams<S> {
    pub fn none() -> Self {
        Self { beta: S::zero(), k: S::half(), epsilon: S::zero() }
    }

    /// Exponent `1/k` applied to the bracket.
    pub fn exponent(&self) -> S {
        S::one() / self.k
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= S::zero()) || !self.beta.is_finite() {
            return Err(PricerError::InvalidParameter(format!("penalty beta must be >= 0, got {}", self.beta)));
        }
        if !(self.k > S::zero()) || !self.k.is_finite() {
            return Err(PricerError::InvalidParameter(format!("penalty power k must be > 0, got {}", self.k)));
        }
        if !(self.epsilon >= S::zero()) {
            return Err(PricerError::InvalidParameter("smoothing epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Cell average of the diffusion tensor `M` over one control volume.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CellTensor<S> {
    pub m11: S,
    pub m12: S,
    pub m22: S,
}

impl<S: Real> CellTensor<S> {
    pub fn apply(&self, v: [S; 2]) -> [S; 2] {
        [self.m11 * v[0] + self.m12 * v[1], self.m12 * v[0] + self.m22 * v[1]]
    }

    pub fn determinant(&self) -> S {
        self.m11 * self.m22 - self.m12 * self.m12
    }
}

/// Exact cell average of `M`:
/// `m11 = σ₁²/6 (x_r³ − x_l³)/(x_r − x_l)`, `m12 = ρσ₁σ₂/8 (x_r + x_l)(y_r + y_l)`.
pub fn averaged_tensor<S: Real>(market: &MarketParams<S>, cell: &CellBounds<S>) -> Result<CellTensor<S>> {
    let (xl, xr, yl, yr) = (cell.x_lo, cell.x_hi, cell.y_lo, cell.y_hi);
    if !(xr > xl) || !(yr > yl) {
        return Err(PricerError::InvalidGrid(format!("zero-width control volume [{xl}, {xr}] x [{yl}, {yr}]")));
    }
    if xl < S::zero() || yl < S::zero() {
        return Err(PricerError::InvalidGrid("control volume bounds must be nonnegative".into()));
    }
    let sixth = S::lit(1.0 / 6.0);
    // (b³ − a³)/(b − a) = a² + ab + b²
    let m11 = market.sigma1 * market.sigma1 * sixth * (xl * xl + xl * xr + xr * xr);
    let m22 = market.sigma2 * market.sigma2 * sixth * (yl * yl + yl * yr + yr * yr);
    let m12 = market.rho * market.sigma1 * market.sigma2 * S::lit(0.125) * (xl + xr) * (yl + yr);
    Ok(CellTensor { m11, m12, m22 })
}

/// Convection field `f = (c_x x, c_y y)` and reaction coefficient `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvectionField<S> {
    pub cx: S,
    pub cy: S,
    pub lambda: S,
}

impl<S: Real> ConvectionField<S> {
    pub fn from_market(m: &MarketParams<S>) -> Self {
        let hc = m.half_cross();
        Self {
            cx: m.rate - m.sigma1 * m.sigma1 - hc,
            cy: m.rate - m.sigma2 * m.sigma2 - hc,
            lambda: S::lit(-3.0) * m.rate
                + m.sigma1 * m.sigma1
                + m.sigma2 * m.sigma2
                + m.rho * m.sigma1 * m.sigma2,
        }
    }

    /// `f_x` on the face through abscissa `x`.
    #[inline]
    pub fn fx(&self, x: S) -> S {
        self.cx * x
    }

    #[inline]
    pub fn fy(&self, y: S) -> S {
        self.cy * y
    }

    /// `f_x` on the east face `x_{i+1/2}` of column `i`.
    pub fn fx_at(&self, grid: &Grid2D<S>, i: usize) -> S {
        self.fx(grid.x.east_face(i))
    }

    pub fn fy_at(&self, grid: &Grid2D<S>, j: usize) -> S {
        self.fy(grid.y.east_face(j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff<S> {
    /// `max(K − α₁x − α₂y, 0)`
    BasketPut { alpha1: S, alpha2: S },
    /// `max(max(x, y) − K, 0)`
    CallOnMax,
}

impl<S: Real> Payoff<S> {
    pub fn value(&self, strike: S, x: S, y: S) -> S {
        match *self {
            Payoff::BasketPut { alpha1, alpha2 } => (strike - alpha1 * x - alpha2 * y).max(S::zero()),
            Payoff::CallOnMax => (x.max(y) - strike).max(S::zero()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payoff::BasketPut { .. } => "basket-put",
            Payoff::CallOnMax => "call-on-max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionStyle {
    European,
    American,
}

/// Domain edges carrying Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// `x = 0`
    West,
    /// `y = 0`
    South,
    /// `x = x_max`
    East,
    /// `y = y_max`
    North,
}

impl std::str::FromStr for Edge {
    type Err = PricerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "west" => Ok(Edge::West),
            "south" => Ok(Edge::South),
            "east" => Ok(Edge::East),
            "north" => Ok(Edge::North),
            other => Err(PricerError::InvalidParameter(format!("unknown edge tag {other:?}"))),
        }
    }
}

/// Family of Dirichlet data used on the four edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// 0 on `x = 0` and `y = 0`; `x_max − Ke^{−rτ}` and `y_max − Ke^{−rτ}` on the far edges.
    FarFieldEuropean,
    /// `K` on `x = 0` and `y = 0`; 0 on the far edges.
    FarFieldAmerican,
    /// Closed-form call-on-max prices on every edge (one-asset calls on the near edges).
    AnalyticCallOnMax,
}

impl BoundaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryKind::FarFieldEuropean => "far-field-european",
            BoundaryKind::FarFieldAmerican => "far-field-american",
            BoundaryKind::AnalyticCallOnMax => "analytic",
        }
    }
}

/// Everything that defines the continuous problem on the truncated domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec<S> {
    pub market: MarketParams<S>,
    pub penalty: PenaltyParams<S>,
    pub payoff: Payoff<S>,
    pub boundary: BoundaryKind,
    pub style: OptionStyle,
    pub x_max: S,
    pub y_max: S,
    /// Accept initial data that disagrees with the boundary data at τ = 0.
    pub allow_inconsistent_boundary: bool,
}

impl<S: Real> ProblemSpec<S> {
    /// European call on the maximum on `[0, 300]²`, `T = 1/12`, far-field data.
    pub fn european_table() -> Self {
        Self {
            market: MarketParams {
                sigma1: S::lit(0.3),
                sigma2: S::lit(0.3),
                rho: S::lit(0.3),
                rate: S::lit(0.08),
                strike: S::lit(100.0),
                maturity: S::lit(1.0 / 12.0),
            },
            penalty: PenaltyParams::none(),
            payoff: Payoff::CallOnMax,
            boundary: BoundaryKind::FarFieldEuropean,
            style: OptionStyle::European,
            x_max: S::lit(300.0),
            y_max: S::lit(300.0),
            allow_inconsistent_boundary: true,
        }
    }

    /// American basket put on `[0, 300]²`, `T = 1/6`, `β = 256`, `k = 1/2`.
    pub fn american_table() -> Self {
        let strike = S::lit(100.0);
        Self {
            market: MarketParams {
                sigma1: S::lit(0.3),
                sigma2: S::lit(0.3),
                rho: S::lit(0.3),
                rate: S::lit(0.08),
                strike,
                maturity: S::lit(1.0 / 6.0),
            },
            penalty: PenaltyParams { beta: S::lit(256.0), k: S::half(), epsilon: S::lit(1e-8) * strike },
            payoff: Payoff::BasketPut { alpha1: S::half(), alpha2: S::half() },
            boundary: BoundaryKind::FarFieldAmerican,
            style: OptionStyle::American,
            x_max: S::lit(300.0),
            y_max: S::lit(300.0),
            allow_inconsistent_boundary: true,
        }
    }

    /// Penalty actually applied: zero for European options.
    pub fn effective_penalty(&self) -> PenaltyParams<S> {
        match self.style {
            OptionStyle::European => PenaltyParams { beta: S::zero(), ..self.penalty },
            OptionStyle::American => self.penalty,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.penalty.validate()?;
        if let Payoff::BasketPut { alpha1, alpha2 } = self.payoff {
            if (alpha1 + alpha2 - S::one()).abs() > S::lit(1e-12) {
                return Err(PricerError::InvalidParameter("basket weights must sum to 1".into()));
            }
        }
        if self.boundary == BoundaryKind::AnalyticCallOnMax && self.payoff != Payoff::CallOnMax {
            return Err(PricerError::InvalidParameter("analytic boundary data needs the call-on-max payoff".into()));
        }
        if !(self.x_max > S::zero() && self.y_max > S::zero()) {
            return Err(PricerError::InvalidParameter("domain extents must be positive".into()));
        }
        Ok(())
    }

    pub fn payoff_at(&self, x: S, y: S) -> S {
        self.payoff.value(self.market.strike, x, y)
    }

    /// Dirichlet value on `edge` at coordinate `position` along it.
    pub fn boundary_value(&self, edge: Edge, position: S, tau: S) -> S {
        let m = &self.market;
        let k = m.strike;
        match self.boundary {
            BoundaryKind::FarFieldEuropean => match edge {
                Edge::West | Edge::South => S::zero(),
                Edge::East => self.x_max - k * (-m.rate * tau).exp(),
                Edge::North => self.y_max - k * (-m.rate * tau).exp(),
            },
            BoundaryKind::FarFieldAmerican => match edge {
                Edge::West | Edge::South => k,
                Edge::East | Edge::North => S::zero(),
            },
            BoundaryKind::AnalyticCallOnMax => {
                let (x, y) = match edge {
                    Edge::West => (S::zero(), position),
                    Edge::South => (position, S::zero()),
                    Edge::East => (self.x_max, position),
                    Edge::North => (position, self.y_max),
                };
                self.analytic_call_on_max(x, y, tau)
            }
        }
    }

    /// Dirichlet value at boundary node `(x, y)`; far edges take precedence at corners.
    pub fn boundary_node_value(&self, x: S, y: S, tau: S) -> S {
        if x >= self.x_max {
            self.boundary_value(Edge::East, y, tau)
        } else if y >= self.y_max {
            self.boundary_value(Edge::North, x, tau)
        } else if x <= S::zero() {
            self.boundary_value(Edge::West, y, tau)
        } else {
            self.boundary_value(Edge::South, x, tau)
        }
    }

    fn analytic_call_on_max(&self, x: S, y: S, tau: S) -> S {
        let m = &self.market;
        let (x, y, t) = (x.as_f64(), y.as_f64(), tau.as_f64());
        let k = m.strike.as_f64();
        if t <= 0.0 {
            return S::lit((x.max(y) - k).max(0.0));
        }
        let r = m.rate.as_f64();
        let v = if x <= 0.0 {
            reference::black_scholes_call(y, k, t, r, r, m.sigma2.as_f64())
        } else if y <= 0.0 {
            reference::black_scholes_call(x, k, t, r, r, m.sigma1.as_f64())
        } else {
            reference::analytic_price(&reference::AnalyticInputs::new(
                x,
                y,
                k,
                t,
                m.sigma1.as_f64(),
                m.sigma2.as_f64(),
                m.rho.as_f64(),
                r,
            ))
        };
        S::lit(v)
    }

    /// Largest gap between the payoff and the boundary data at τ = 0 over the boundary nodes.
    pub fn boundary_mismatch(&self, grid: &Grid2D<S>) -> S {
        let n = grid.n();
        let mut worst = S::zero();
        for i in 0..=n + 1 {
            for j in 0..=n + 1 {
                if grid.is_interior(i, j) {
                    continue;
                }
                let [x, y] = grid.node(i, j);
                let gap = (self.payoff_at(x, y) - self.boundary_node_value(x, y, S::zero())).abs();
                worst = worst.max(gap);
            }
        }
        worst
    }

    /// Validates the spec against a grid, including initial/boundary consistency.
    pub fn check_against(&self, grid: &Grid2D<S>) -> Result<()> {
        self.validate()?;
        if (grid.x.max() - self.x_max).abs() > S::lit(1e-9) * self.x_max
            || (grid.y.max() - self.y_max).abs() > S::lit(1e-9) * self.y_max
        {
            return Err(PricerError::GridMismatch("grid extents differ from the problem domain".into()));
        }
        if !self.allow_inconsistent_boundary {
            let gap = self.boundary_mismatch(grid);
            if gap > S::lit(1e-12) * (S::one() + self.market.strike) {
                return Err(PricerError::InvalidParameter(format!(
                    "payoff and boundary data disagree at tau = 0 by {gap}"
                )));
            }
        }
        Ok(())
    }
}

/// Initial condition `V(x, y, 0) = V*(x, y)` sampled at every node.
pub fn payoff_surface<S: Real>(spec: &ProblemSpec<S>, grid: &Grid2D<S>) -> PriceSurface<S> {
    let n = grid.n();
    let mut values = Vec::with_capacity((n + 2) * (n + 2));
    for i in 0..=n + 1 {
        for j in 0..=n + 1 {
            let [x, y] = grid.node(i, j);
            values.push(spec.payoff_at(x, y));
        }
    }
    PriceSurface::new(grid, values, S::zero(), spec.payoff.name())
}
