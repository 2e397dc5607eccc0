use crate::error::{PricerError, Result};
use crate::grid::Grid2D;
use crate::scalar::Real;

/// Option values at every node (boundary included) of a grid at one time level.
///
/// Values are stored row by row: row `i` is the fixed-`x` line `x_i`, with `y` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface<S> {
    n: usize,
    x_nodes: Vec<S>,
    y_nodes: Vec<S>,
    values: Vec<S>,
    pub tau: S,
    pub payoff: String,
}

impl<S: Real> PriceSurface<S> {
    pub fn new(grid: &Grid2D<S>, values: Vec<S>, tau: S, payoff: &str) -> Self {
        let n = grid.n();
        assert_eq!(values.len(), (n + 2) * (n + 2), "surface size must be (N+2)^2");
        Self {
            n,
            x_nodes: grid.x.nodes().to_vec(),
            y_nodes: grid.y.nodes().to_vec(),
            values,
            tau,
            payoff: payoff.to_string(),
        }
    }

    /// Surface from interior unknowns (row-major, `j` fastest) plus boundary data.
    pub fn from_interior(
        grid: &Grid2D<S>,
        interior: &[S],
        tau: S,
        payoff: &str,
        boundary: impl Fn(S, S) -> S,
    ) -> Self {
        let n = grid.n();
        assert_eq!(interior.len(), n * n);
        let mut values = Vec::with_capacity((n + 2) * (n + 2));
        for i in 0..=n + 1 {
            for j in 0..=n + 1 {
                if grid.is_interior(i, j) {
                    values.push(interior[grid.unknown_index(i, j)]);
                } else {
                    let [x, y] = grid.node(i, j);
                    values.push(boundary(x, y));
                }
            }
        }
        Self::new(grid, values, tau, payoff)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_max(&self) -> S {
        self.x_nodes[self.n + 1]
    }

    pub fn y_max(&self) -> S {
        self.y_nodes[self.n + 1]
    }

    pub fn x_nodes(&self) -> &[S] {
        &self.x_nodes
    }

    pub fn y_nodes(&self) -> &[S] {
        &self.y_nodes
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> S {
        self.values[i * (self.n + 2) + j]
    }

    /// Interior values in unknown ordering.
    pub fn interior(&self) -> Vec<S> {
        let n = self.n;
        (1..=n).flat_map(|i| (1..=n).map(move |j| (i, j))).map(|(i, j)| self.at(i, j)).collect()
    }

    pub fn max_value(&self) -> S {
        self.values.iter().fold(S::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// True when this surface was computed on (a grid with the same nodes as) `grid`.
    pub fn matches_grid(&self, grid: &Grid2D<S>) -> bool {
        let tol = S::lit(1e-9) * (S::one() + grid.x.max().max(grid.y.max()));
        self.n == grid.n()
            && self.x_nodes.iter().zip(grid.x.nodes()).all(|(a, b)| (*a - *b).abs() <= tol)
            && self.y_nodes.iter().zip(grid.y.nodes()).all(|(a, b)| (*a - *b).abs() <= tol)
    }

    pub fn ensure_grid(&self, grid: &Grid2D<S>) -> Result<()> {
        if self.matches_grid(grid) {
            Ok(())
        } else {
            Err(PricerError::GridMismatch(format!(
                "surface has N={} on [0,{}]x[0,{}], grid has N={} on [0,{}]x[0,{}]",
                self.n,
                self.x_max(),
                self.y_max(),
                grid.n(),
                grid.x.max(),
                grid.y.max()
            )))
        }
    }

    /// Bilinear interpolation at `(x, y)` (clamped to the domain).
    pub fn interpolate(&self, x: S, y: S) -> S {
        let locate = |nodes: &[S], v: S| -> (usize, S) {
            let last = nodes.len() - 2;
            let k = match nodes.partition_point(|&n| n <= v) {
                0 => 0,
                p => (p - 1).min(last),
            };
            let t = ((v - nodes[k]) / (nodes[k + 1] - nodes[k])).max(S::zero()).min(S::one());
            (k, t)
        };
        let (i, tx) = locate(&self.x_nodes, x);
        let (j, ty) = locate(&self.y_nodes, y);
        let one = S::one();
        self.at(i, j) * (one - tx) * (one - ty)
            + self.at(i + 1, j) * tx * (one - ty)
            + self.at(i, j + 1) * (one - tx) * ty
            + self.at(i + 1, j + 1) * tx * ty
    }

    /// Values of this surface at the nodes of `grid`: exact sampling when every
    /// node of `grid` is a node of this surface, bilinear interpolation otherwise.
    pub fn resample(&self, grid: &Grid2D<S>) -> Self {
        let n = grid.n();
        let tol = S::lit(1e-9) * (S::one() + self.x_max().max(self.y_max()));
        let find = |nodes: &[S], v: S| nodes.iter().position(|&q| (q - v).abs() <= tol);
        let mut values = Vec::with_capacity((n + 2) * (n + 2));
        for i in 0..=n + 1 {
            for j in 0..=n + 1 {
                let [x, y] = grid.node(i, j);
                let v = match (find(&self.x_nodes, x), find(&self.y_nodes, y)) {
                    (Some(a), Some(b)) => self.at(a, b),
                    _ => self.interpolate(x, y),
                };
                values.push(v);
            }
        }
        Self::new(grid, values, self.tau, &self.payoff)
    }
}
