//! Global semi-discrete operator `dV/dτ = A V + G(V) + F(τ)`.
//!
//! Rows are control-volume balances of the interior cells, ordered
//! `(1,1), (1,2), …, (1,N), (2,1), …`. Each row is kept as an offset-keyed
//! stencil over the full node lattice; weights on Dirichlet nodes are applied to
//! boundary data to form `F(τ)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{PricerError, Result};
use crate::fitted::{ffv_row, fitted_row};
use crate::grid::Grid2D;
use crate::linalg::CsrMatrix;
use crate::lmpfa::{transmissibility, Transmissibility};
use crate::model::{averaged_tensor, CellTensor, ConvectionField, MarketParams, ProblemSpec};
use crate::scalar::Real;
use crate::stencil::{Offset, StencilRow};
use crate::upwind::{convection_row, FaceMask, UpwindOrder};

/// Spatial discretisation used for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeSelector {
    FittedFiniteVolume,
    LmpfaUp1,
    LmpfaUp2,
    FittedLmpfaUp1,
    FittedLmpfaUp2,
}

impl SchemeSelector {
    pub const ALL: [SchemeSelector; 5] = [
        SchemeSelector::FittedFiniteVolume,
        SchemeSelector::LmpfaUp1,
        SchemeSelector::LmpfaUp2,
        SchemeSelector::FittedLmpfaUp1,
        SchemeSelector::FittedLmpfaUp2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeSelector::FittedFiniteVolume => "fitted-fv",
            SchemeSelector::LmpfaUp1 => "lmpfa-up1",
            SchemeSelector::LmpfaUp2 => "lmpfa-up2",
            SchemeSelector::FittedLmpfaUp1 => "fitted-lmpfa-up1",
            SchemeSelector::FittedLmpfaUp2 => "fitted-lmpfa-up2",
        }
    }

    pub fn upwind_order(&self) -> UpwindOrder {
        match self {
            SchemeSelector::LmpfaUp2 | SchemeSelector::FittedLmpfaUp2 => UpwindOrder::Second,
            _ => UpwindOrder::First,
        }
    }

    /// True when the degenerate band uses fitted edge fluxes.
    pub fn is_fitted(&self) -> bool {
        matches!(self, SchemeSelector::FittedLmpfaUp1 | SchemeSelector::FittedLmpfaUp2)
    }
}

impl fmt::Display for SchemeSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeSelector {
    type Err = PricerError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        SchemeSelector::ALL
            .into_iter()
            .find(|sch| sch.name() == key)
            .ok_or_else(|| PricerError::Config(format!("unknown scheme '{s}'")))
    }
}

/// Averaged tensors of every control volume (boundary half-cells included),
/// indexed `i * (N + 2) + j`.
pub fn cell_tensors<S: Real>(market: &MarketParams<S>, grid: &Grid2D<S>) -> Result<Vec<CellTensor<S>>> {
    let m = grid.n() + 2;
    (0..m * m).map(|k| averaged_tensor(market, &grid.control_volume(k / m, k % m))).collect()
}

/// Transmissibilities of all interaction volumes `R_IJ`, `1 <= I, J <= N + 1`.
#[derive(Debug, Clone)]
pub struct TransmissibilityField<S> {
    n: usize,
    data: Vec<Transmissibility<S>>,
}

impl<S: Real> TransmissibilityField<S> {
    pub fn get(&self, i: usize, j: usize) -> &Transmissibility<S> {
        &self.data[(i - 1) * (self.n + 1) + (j - 1)]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transmissibility<S>> {
        self.data.iter()
    }
}

pub fn transmissibility_field<S: Real>(
    grid: &Grid2D<S>,
    tensors: &[CellTensor<S>],
) -> Result<TransmissibilityField<S>> {
    let n = grid.n();
    let m = n + 2;
    let data = (0..(n + 1) * (n + 1))
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / (n + 1) + 1, k % (n + 1) + 1);
            let geom = grid.interaction_volume(i, j)?;
            let t = |(a, b): (usize, usize)| tensors[a * m + b];
            let c = geom.corner_nodes();
            transmissibility(&geom, &[t(c[0]), t(c[1]), t(c[2]), t(c[3])])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransmissibilityField { n, data })
}

/// Corner offsets of `R_IJ` relative to its corner 3 `(I, J)`.
const CORNERS: [Offset; 4] = [(-1, -1), (0, -1), (0, 0), (-1, 0)];

fn add_half_edge<S: Real>(
    row: &mut StencilRow<S>,
    field: &TransmissibilityField<S>,
    (i, j): (usize, usize),
    shift: Offset,
    half_edge: usize,
    sign: S,
) {
    let t = field.get((i as i32 + shift.0) as usize, (j as i32 + shift.1) as usize);
    for (q, &(di, dj)) in CORNERS.iter().enumerate() {
        row.add((di + shift.0, dj + shift.1), sign * t.t[half_edge][q]);
    }
}

/// Diffusive balance (outward fluxes) of cell `(i, j)` over the selected edges.
pub fn diffusion_row<S: Real>(field: &TransmissibilityField<S>, i: usize, j: usize, faces: FaceMask) -> StencilRow<S> {
    let mut row = StencilRow::new();
    let (pos, neg) = (S::one(), -S::one());
    let c = (i, j);
    if faces.east {
        add_half_edge(&mut row, field, c, (1, 0), 2, pos);
        add_half_edge(&mut row, field, c, (1, 1), 0, pos);
    }
    if faces.west {
        add_half_edge(&mut row, field, c, (0, 0), 2, neg);
        add_half_edge(&mut row, field, c, (0, 1), 0, neg);
    }
    if faces.north {
        add_half_edge(&mut row, field, c, (0, 1), 1, pos);
        add_half_edge(&mut row, field, c, (1, 1), 3, pos);
    }
    if faces.south {
        add_half_edge(&mut row, field, c, (0, 0), 1, neg);
        add_half_edge(&mut row, field, c, (1, 0), 3, neg);
    }
    row.pruned()
}

/// Sparse operator over the interior unknowns with Dirichlet couplings kept aside.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilOperator<S> {
    n: usize,
    rows: Vec<StencilRow<S>>,
}

impl<S: Real> StencilOperator<S> {
    /// Operator from one full-lattice row per interior cell (unknown ordering).
    pub fn from_rows(n: usize, rows: Vec<StencilRow<S>>) -> Self {
        assert_eq!(rows.len(), n * n);
        Self { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn row(&self, i: usize, j: usize) -> &StencilRow<S> {
        &self.rows[(i - 1) * self.n + (j - 1)]
    }

    pub fn rows(&self) -> &[StencilRow<S>] {
        &self.rows
    }

    fn cell_of(&self, k: usize) -> (usize, usize) {
        (k / self.n + 1, k % self.n + 1)
    }

    fn target(&self, k: usize, (di, dj): Offset) -> (i32, i32) {
        let (i, j) = self.cell_of(k);
        (i as i32 + di, j as i32 + dj)
    }

    fn is_interior(&self, (a, b): (i32, i32)) -> bool {
        let n = self.n as i32;
        (1..=n).contains(&a) && (1..=n).contains(&b)
    }

    /// Matrix entry `A[row][col]` in unknown numbering.
    pub fn entry(&self, row: usize, col: usize) -> S {
        let (ci, cj) = self.cell_of(col);
        let (ri, rj) = self.cell_of(row);
        self.rows[row].get((ci as i32 - ri as i32, cj as i32 - rj as i32))
    }

    /// Largest `|col - row|` with a nonzero entry.
    pub fn bandwidth(&self) -> usize {
        let n = self.n as i32;
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(k, r)| {
                r.entries()
                    .iter()
                    .filter(move |&&(o, w)| w != S::zero() && self.is_interior(self.target(k, o)))
                    .map(move |&((di, dj), _)| (di * n + dj).unsigned_abs() as usize)
            })
            .max()
            .unwrap_or(0)
    }

    /// Multiplies every row by `scale[row]`.
    pub fn scale_rows(&mut self, scale: &[S]) {
        for (row, &s) in self.rows.iter_mut().zip(scale) {
            let mut scaled = StencilRow::new();
            scaled.add_scaled(row, s);
            *row = scaled;
        }
    }

    /// Row-wise sum `self + other` (same dimension).
    pub fn add(&mut self, other: &StencilOperator<S>) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.add_scaled(b, S::one());
        }
    }

    /// Interior part as a compressed sparse row matrix.
    pub fn to_csr(&self) -> CsrMatrix<S> {
        let n = self.n as i32;
        let triplets = self.rows.iter().enumerate().map(|(k, r)| {
            let mut cols: Vec<(usize, S)> = r
                .entries()
                .iter()
                .filter_map(|&(o, w)| {
                    let (a, b) = self.target(k, o);
                    self.is_interior((a, b)).then(|| (((a - 1) * n + (b - 1)) as usize, w))
                })
                .collect();
            cols.sort_by_key(|c| c.0);
            cols
        });
        CsrMatrix::from_sorted_rows(self.dim(), triplets)
    }

    /// Dirichlet couplings: per row, the boundary nodes it references and their weights.
    pub fn boundary_couplings(&self) -> Vec<Vec<((usize, usize), S)>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                r.entries()
                    .iter()
                    .filter_map(|&(o, w)| {
                        let t = self.target(k, o);
                        (!self.is_interior(t)).then_some(((t.0 as usize, t.1 as usize), w))
                    })
                    .collect()
            })
            .collect()
    }

    /// `F` from boundary node values `g(i, j)`.
    pub fn boundary_vector(&self, g: impl Fn(usize, usize) -> S + Sync) -> Vec<S> {
        self.boundary_couplings().iter().map(|c| c.iter().map(|&((a, b), w)| w * g(a, b)).sum()).collect()
    }

    /// `A v + F` for interior values `v` and boundary values `g`.
    pub fn apply_full(&self, v: &[S], g: impl Fn(usize, usize) -> S) -> Vec<S> {
        let n = self.n;
        (0..self.dim())
            .map(|k| {
                let (i, j) = self.cell_of(k);
                self.rows[k].apply(i, j, |a, b| {
                    if (1..=n).contains(&a) && (1..=n).contains(&b) {
                        v[(a - 1) * n + (b - 1)]
                    } else {
                        g(a, b)
                    }
                })
            })
            .collect()
    }

    /// Writes the interior matrix as `row col value` triplets (0-based).
    pub fn write_dump(&self, scheme: SchemeSelector, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# lmpfa-pricer matrix N={} scheme={}", self.n, scheme.name())?;
        let csr = self.to_csr();
        for r in 0..csr.dim() {
            for (c, v) in csr.row(r) {
                writeln!(out, "{r} {c} {v}")?;
            }
        }
        Ok(())
    }
}

/// Unscaled diffusion balance `A_mp` (outward fluxes per cell).
pub fn assemble_diffusion<S: Real>(grid: &Grid2D<S>, tensors: &[CellTensor<S>]) -> Result<StencilOperator<S>> {
    let field = transmissibility_field(grid, tensors)?;
    let n = grid.n();
    let rows = (0..n * n)
        .into_par_iter()
        .map(|k| diffusion_row(&field, k / n + 1, k % n + 1, FaceMask::ALL))
        .collect();
    Ok(StencilOperator::from_rows(n, rows))
}

/// Unscaled convection balance of the given upwind order.
pub fn assemble_convection<S: Real>(grid: &Grid2D<S>, field: &ConvectionField<S>, order: UpwindOrder) -> StencilOperator<S> {
    let n = grid.n();
    let rows = (0..n * n)
        .into_par_iter()
        .map(|k| convection_row(grid, field, order, k / n + 1, k % n + 1, FaceMask::ALL))
        .collect();
    StencilOperator::from_rows(n, rows)
}

/// `A = L⁻¹(diffusion + convection + A_L)` for the chosen scheme.
pub fn assemble_operator<S: Real>(
    scheme: SchemeSelector,
    grid: &Grid2D<S>,
    spec: &ProblemSpec<S>,
) -> Result<StencilOperator<S>> {
    let market = &spec.market;
    let n = grid.n();
    let convection = ConvectionField::from_market(market);
    let field = match scheme {
        SchemeSelector::FittedFiniteVolume => None,
        _ => Some(transmissibility_field(grid, &cell_tensors(market, grid)?)?),
    };
    let order = scheme.upwind_order();
    let rows = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n + 1, k % n + 1);
            let mut row = match &field {
                None => ffv_row(grid, market, i, j),
                Some(t) if scheme.is_fitted() && (i == 1 || j == 1) => fitted_row(grid, market, t, order, i, j)?,
                Some(t) => {
                    let mut r = diffusion_row(t, i, j, FaceMask::ALL);
                    r.add_scaled(&convection_row(grid, &convection, order, i, j, FaceMask::ALL), S::one());
                    r
                }
            };
            let meas = grid.measure(i, j);
            row.add((0, 0), convection.lambda * meas);
            let mut scaled = StencilRow::new();
            scaled.add_scaled(&row, S::one() / meas);
            Ok(scaled)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StencilOperator::from_rows(n, rows))
}

/// Boundary vector `F(τ)` of an assembled operator.
pub fn boundary_vector<S: Real>(op: &StencilOperator<S>, grid: &Grid2D<S>, spec: &ProblemSpec<S>, tau: S) -> Vec<S> {
    op.boundary_vector(|i, j| {
        let [x, y] = grid.node(i, j);
        spec.boundary_node_value(x, y, tau)
    })
}

/// `(A, F(τ))` for the chosen scheme.
pub fn assemble_system<S: Real>(
    scheme: SchemeSelector,
    grid: &Grid2D<S>,
    spec: &ProblemSpec<S>,
    tau: S,
) -> Result<(StencilOperator<S>, Vec<S>)> {
    let op = assemble_operator(scheme, grid, spec)?;
    let f = boundary_vector(&op, grid, spec, tau);
    Ok((op, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_uniform_grid;
    use crate::model::ProblemSpec;

    fn table_spec() -> ProblemSpec<f64> {
        ProblemSpec::european_table()
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeSelector::ALL {
            assert_eq!(s.name().parse::<SchemeSelector>().unwrap(), s);
        }
        assert_eq!("FITTED_LMPFA_UP2".parse::<SchemeSelector>().unwrap(), SchemeSelector::FittedLmpfaUp2);
        assert!("o-method".parse::<SchemeSelector>().is_err());
    }

    #[test]
    fn diffusion_of_constants_vanishes() {
        let g = build_uniform_grid(7, 300.0, 300.0).unwrap();
        let t = cell_tensors(&table_spec().market, &g).unwrap();
        let op = assemble_diffusion(&g, &t).unwrap();
        let r = op.apply_full(&vec![3.0; 49], |_, _| 3.0);
        let scale = op.rows().iter().map(|r| r.max_abs()).fold(0.0, f64::max);
        assert!(r.iter().all(|v| v.abs() < 1e-10 * scale));
    }

    #[test]
    fn seven_point_pattern() {
        let g = build_uniform_grid(6, 300.0, 300.0).unwrap();
        let t = cell_tensors(&table_spec().market, &g).unwrap();
        let op = assemble_diffusion(&g, &t).unwrap();
        let allowed = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (-1, -1), (1, 1)];
        for r in op.rows() {
            assert!(r.entries().iter().all(|(o, _)| allowed.contains(o)));
        }
        let inner = op.row(3, 3);
        assert_eq!(inner.entries().len(), 7);
        assert!(op.bandwidth() <= 2 * 6 + 2);
    }

    #[test]
    fn corner_coefficient_from_transmissibilities() {
        let g = build_uniform_grid(3, 4.0, 4.0).unwrap();
        let tensors = cell_tensors(&table_spec().market, &g).unwrap();
        let field = transmissibility_field(&g, &tensors).unwrap();
        let op = assemble_diffusion(&g, &tensors).unwrap();
        // c_22 = T_13^{3,3} + T_43^{3,3} (1-based row/col)
        let t = field.get(3, 3);
        let expect = t.t[0][2] + t.t[3][2];
        assert!((op.row(2, 2).get((1, 1)) - expect).abs() < 1e-15);
    }

    #[test]
    fn identity_tensor_gives_five_point_laplacian() {
        let g = build_uniform_grid(5, 6.0f64, 6.0).unwrap();
        let m = (6 + 1) * (6 + 1);
        let tensors = vec![CellTensor { m11: 1.0, m12: 0.0, m22: 1.0 }; m];
        let op = assemble_diffusion(&g, &tensors).unwrap();
        let r = op.row(3, 3);
        for (o, w) in [((0, 0), -4.0), ((1, 0), 1.0), ((-1, 0), 1.0), ((0, 1), 1.0), ((0, -1), 1.0)] {
            assert!((r.get(o) - w).abs() < 1e-12, "{o:?}: {}", r.get(o));
        }
        assert!(r.get((1, 1)).abs() < 1e-12 && r.get((-1, -1)).abs() < 1e-12);
    }

    #[test]
    fn reaction_adds_lambda_on_diagonal() {
        let g = build_uniform_grid(5, 300.0, 300.0).unwrap();
        let spec = table_spec();
        let a = assemble_operator(SchemeSelector::LmpfaUp1, &g, &spec).unwrap();
        let lambda = ConvectionField::from_market(&spec.market).lambda;
        // diagonal minus the flux part (recomputed without reaction) equals λ
        let tensors = cell_tensors(&spec.market, &g).unwrap();
        let mut flux = assemble_diffusion(&g, &tensors).unwrap();
        flux.add(&assemble_convection(&g, &ConvectionField::from_market(&spec.market), UpwindOrder::First));
        for (i, j) in [(1, 1), (3, 2), (5, 5)] {
            let d = a.row(i, j).get((0, 0)) - flux.row(i, j).get((0, 0)) / g.measure(i, j);
            assert!((d - lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn fitted_differs_only_in_band() {
        let g = build_uniform_grid(8, 300.0, 300.0).unwrap();
        let spec = table_spec();
        for (plain, fitted) in [
            (SchemeSelector::LmpfaUp1, SchemeSelector::FittedLmpfaUp1),
            (SchemeSelector::LmpfaUp2, SchemeSelector::FittedLmpfaUp2),
        ] {
            let a = assemble_operator(plain, &g, &spec).unwrap();
            let b = assemble_operator(fitted, &g, &spec).unwrap();
            for i in 1..=8 {
                for j in 1..=8 {
                    let same = a.row(i, j) == b.row(i, j);
                    assert_eq!(same, i >= 2 && j >= 2, "row ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn only_boundary_vector_depends_on_tau() {
        let g = build_uniform_grid(6, 300.0, 300.0).unwrap();
        let spec = table_spec();
        let (a0, f0) = assemble_system(SchemeSelector::FittedLmpfaUp2, &g, &spec, 0.0).unwrap();
        let (a1, f1) = assemble_system(SchemeSelector::FittedLmpfaUp2, &g, &spec, 0.05).unwrap();
        assert_eq!(a0, a1);
        assert_ne!(f0, f1);
    }

    #[test]
    fn zero_volatility_has_no_diffusion() {
        let g = build_uniform_grid(5, 300.0, 300.0).unwrap();
        let mut spec = table_spec();
        spec.market.sigma1 = 0.0;
        spec.market.sigma2 = 0.0;
        let tensors = cell_tensors(&spec.market, &g).unwrap();
        assert!(tensors.iter().all(|t| *t == CellTensor::default()));
        let d = assemble_diffusion(&g, &tensors).unwrap();
        assert!(d.rows().iter().all(|r| r.entries().iter().all(|(_, w)| *w == 0.0)));
        let field = ConvectionField::from_market(&spec.market);
        let conv = assemble_convection(&g, &field, UpwindOrder::First);
        let a = assemble_operator(SchemeSelector::LmpfaUp1, &g, &spec).unwrap();
        for i in 1..=5 {
            for j in 1..=5 {
                let mut want = conv.row(i, j).clone();
                want.add((0, 0), field.lambda * g.measure(i, j));
                for &(o, w) in want.entries() {
                    let got = a.row(i, j).get(o);
                    assert!((got - w / g.measure(i, j)).abs() < 1e-12 * (1.0 + got.abs()));
                }
            }
        }
    }

    #[test]
    fn csr_matches_entries_and_dump_format() {
        let g = build_uniform_grid(4, 300.0, 300.0).unwrap();
        let a = assemble_operator(SchemeSelector::LmpfaUp2, &g, &table_spec()).unwrap();
        let csr = a.to_csr();
        for r in 0..16 {
            for c in 0..16 {
                assert_eq!(csr.get(r, c), a.entry(r, c));
            }
        }
        let mut buf = Vec::new();
        a.write_dump(SchemeSelector::LmpfaUp2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# lmpfa-pricer matrix N=4 scheme=lmpfa-up2");
        let first: Vec<&str> = lines.next().unwrap().split(' ').collect();
        assert_eq!(first.len(), 3);
        assert!(first[2].parse::<f64>().is_ok());
    }

    #[test]
    fn composite_upwind1_has_negative_diagonal_and_bounded_offdiagonals() {
        // the 7-point MPFA stencil is not an M-matrix for strongly anisotropic cells,
        // but the diagonal still dominates every single neighbour
        let g = build_uniform_grid(49, 300.0, 300.0).unwrap();
        let a = assemble_operator(SchemeSelector::LmpfaUp1, &g, &table_spec()).unwrap();
        let csr = a.to_csr();
        for r in 0..csr.dim() {
            let d = csr.get(r, r);
            assert!(d < 0.0, "A[{r}][{r}] = {d}");
            for (c, v) in csr.row(r) {
                if c != r {
                    assert!(v.abs() < d.abs(), "A[{r}][{c}] = {v}, diagonal {d}");
                }
            }
        }
    }
}
