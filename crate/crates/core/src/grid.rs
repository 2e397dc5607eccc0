//! Truncated computational domain: nodes, control volumes and interaction volumes.
//!
//! Nodes are indexed `0..=N+1` on each axis. Nodes `1..=N` carry unknowns, nodes
//! `0` and `N+1` carry Dirichlet data. The control volume of node `i` spans
//! `[x_{i-1/2}, x_{i+1/2}]` with the ghost conventions `x_{-1/2} = x_0` and
//! `x_{N+3/2} = x_{N+1}`, so the two boundary cells are half cells.

use crate::error::{PricerError, Result};
use crate::scalar::Real;

pub type Point<S> = [S; 2];

/// One coordinate axis of the tensor-product grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis1D<S> {
    nodes: Vec<S>,
}

impl<S: Real> Axis1D<S> {
    /// Uniform axis with `n` interior nodes on `[0, max]`.
    pub fn uniform(n: usize, max: S) -> Result<Self> {
        if n < 2 {
            return Err(PricerError::InvalidGrid(format!("need at least 2 interior nodes, got {n}")));
        }
        if !(max > S::zero()) || !max.is_finite() {
            return Err(PricerError::InvalidGrid(format!("extent must be positive, got {max}")));
        }
        let intervals = S::from_usize_lossy(n + 1);
        let mut nodes: Vec<S> =
            (0..n + 2).map(|i| max * S::from_usize_lossy(i) / intervals).collect();
        nodes[n + 1] = max;
        Ok(Self { nodes })
    }

    /// Axis from user supplied node coordinates `x_0 = 0 < x_1 < ... < x_{N+1}`.
    pub fn from_nodes(nodes: Vec<S>) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(PricerError::InvalidGrid(format!(
                "need at least 4 nodes (2 interior), got {}",
                nodes.len()
            )));
        }
        if nodes[0] != S::zero() {
            return Err(PricerError::InvalidGrid("first node must be 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(PricerError::InvalidGrid("nodes must be finite and strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    /// Number of interior nodes `N`.
    pub fn interior(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn max(&self) -> S {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, i: usize) -> S {
        self.nodes[i]
    }

    /// `x_{i-1/2}` for `i = 0..=N+1` (with `x_{-1/2} = x_0`).
    #[inline]
    pub fn west_face(&self, i: usize) -> S {
        if i == 0 {
            self.nodes[0]
        } else {
            (self.nodes[i - 1] + self.nodes[i]) * S::half()
        }
    }

    /// `x_{i+1/2}` for `i = 0..=N+1` (with `x_{N+3/2} = x_{N+1}`).
    #[inline]
    pub fn east_face(&self, i: usize) -> S {
        let last = self.nodes.len() - 1;
        if i == last {
            self.nodes[last]
        } else {
            (self.nodes[i] + self.nodes[i + 1]) * S::half()
        }
    }

    /// Control-volume width `h_i = x_{i+1/2} - x_{i-1/2}`.
    #[inline]
    pub fn width(&self, i: usize) -> S {
        self.east_face(i) - self.west_face(i)
    }

    /// Midpoints `x_{1/2}, ..., x_{N+1/2}`.
    pub fn midpoints(&self) -> Vec<S> {
        (1..self.nodes.len()).map(|i| self.west_face(i)).collect()
    }

    /// Index of the interval `[x_k, x_{k+1}]` containing `x` (clamped to the axis).
    pub fn locate(&self, x: S) -> usize {
        let last = self.nodes.len() - 2;
        match self.nodes.partition_point(|&n| n <= x) {
            0 => 0,
            p => (p - 1).min(last),
        }
    }
}

/// Rectangular bounds of a control volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds<S> {
    pub x_lo: S,
    pub x_hi: S,
    pub y_lo: S,
    pub y_hi: S,
}

impl<S: Real> CellBounds<S> {
    pub fn measure(&self) -> S {
        (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)
    }
}

/// Tensor-product grid over `[0, x_max] x [0, y_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D<S> {
    pub x: Axis1D<S>,
    pub y: Axis1D<S>,
}

/// Builds the uniform grid with `n` interior nodes per axis and spacing `max/(n+1)`.
pub fn build_uniform_grid<S: Real>(n: usize, x_max: S, y_max: S) -> Result<Grid2D<S>> {
    Ok(Grid2D { x: Axis1D::uniform(n, x_max)?, y: Axis1D::uniform(n, y_max)? })
}

impl<S: Real> Grid2D<S> {
    /// Grid from explicit axes; both must have the same interior count.
    pub fn from_axes(x: Axis1D<S>, y: Axis1D<S>) -> Result<Self> {
        if x.interior() != y.interior() {
            return Err(PricerError::InvalidGrid(format!(
                "axes must have equal interior counts ({} vs {})",
                x.interior(),
                y.interior()
            )));
        }
        Ok(Self { x, y })
    }

    /// Interior unknown count per axis.
    pub fn n(&self) -> usize {
        self.x.interior()
    }

    /// Number of unknowns `N^2`.
    pub fn unknowns(&self) -> usize {
        self.n() * self.n()
    }

    /// Row-major position of interior node `(i, j)`, `j` fastest.
    #[inline]
    pub fn unknown_index(&self, i: usize, j: usize) -> usize {
        (i - 1) * self.n() + (j - 1)
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let n = self.n();
        (1..=n).contains(&i) && (1..=n).contains(&j)
    }

    pub fn node(&self, i: usize, j: usize) -> Point<S> {
        [self.x.node(i), self.y.node(j)]
    }

    pub fn control_volume(&self, i: usize, j: usize) -> CellBounds<S> {
        CellBounds {
            x_lo: self.x.west_face(i),
            x_hi: self.x.east_face(i),
            y_lo: self.y.west_face(j),
            y_hi: self.y.east_face(j),
        }
    }

    /// `meas(C_ij) = h_i l_j`.
    #[inline]
    pub fn measure(&self, i: usize, j: usize) -> S {
        self.x.width(i) * self.y.width(j)
    }

    /// Geometry of `R_ij = [x_{i-1}, x_i] x [y_{j-1}, y_j]`, `1 <= i, j <= N+1`.
    pub fn interaction_volume(&self, i: usize, j: usize) -> Result<InteractionVolumeGeometry<S>> {
        let max = self.n() + 1;
        if !(1..=max).contains(&i) || !(1..=max).contains(&j) {
            return Err(PricerError::IndexOutOfRange { i, j, max });
        }
        let (x0, x1) = (self.x.node(i - 1), self.x.node(i));
        let (y0, y1) = (self.y.node(j - 1), self.y.node(j));
        let xm = self.x.west_face(i);
        let ym = self.y.west_face(j);
        Ok(InteractionVolumeGeometry {
            i,
            j,
            corners: [[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            edge_midpoints: [[xm, y0], [x1, ym], [xm, y1], [x0, ym]],
            center: [xm, ym],
            normals: [
                [ym - y0, S::zero()],
                [S::zero(), x1 - xm],
                [y1 - ym, S::zero()],
                [S::zero(), xm - x0],
            ],
        })
    }
}

/// Interaction volume `R_ij` with the numbering of its corners and half-edges.
///
/// Corners (cell centres): 1 = `(i-1, j-1)`, 2 = `(i, j-1)`, 3 = `(i, j)`, 4 = `(i-1, j)`.
/// Half-edges meet at the centre `x̄_5 = (x_{i-1/2}, y_{j-1/2})`:
/// 1 runs down to `x̄_1` (between corners 1 and 2), 2 runs right to `x̄_2`
/// (between 2 and 3), 3 runs up to `x̄_3` (between 4 and 3), 4 runs left to `x̄_4`
/// (between 1 and 4). Normals point along `+x` for half-edges 1, 3 and `+y` for 2, 4
/// and have the length of their half-edge.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionVolumeGeometry<S> {
    pub i: usize,
    pub j: usize,
    pub corners: [Point<S>; 4],
    pub edge_midpoints: [Point<S>; 4],
    pub center: Point<S>,
    pub normals: [Point<S>; 4],
}

impl<S: Real> InteractionVolumeGeometry<S> {
    /// Node indices of the four corners in corner order.
    pub fn corner_nodes(&self) -> [(usize, usize); 4] {
        let (i, j) = (self.i, self.j);
        [(i - 1, j - 1), (i, j - 1), (i, j), (i - 1, j)]
    }

    /// End points of half-edge `p` (0-based).
    pub fn half_edge(&self, p: usize) -> (Point<S>, Point<S>) {
        match p {
            0 => (self.edge_midpoints[0], self.center),
            1 => (self.center, self.edge_midpoints[1]),
            2 => (self.center, self.edge_midpoints[2]),
            _ => (self.edge_midpoints[3], self.center),
        }
    }
}

/// Rotation by `-pi/2`: `R = [[0, 1], [-1, 0]]`.
#[inline]
pub fn rotate<S: Real>(v: Point<S>) -> Point<S> {
    [v[1], -v[0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_uniform_axis() {
        let g = build_uniform_grid(2, 3.0f64, 3.0).unwrap();
        assert_eq!(g.x.nodes(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(g.x.midpoints(), vec![0.5, 1.5, 2.5]);
        assert_eq!(g.x.width(1), 1.0);
        assert_eq!(g.x.width(2), 1.0);
        assert_eq!(g.x.west_face(0), 0.0);
        assert_eq!(g.x.east_face(3), 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_uniform_grid(1, 3.0, 3.0).is_err());
        assert!(build_uniform_grid(4, 0.0, 3.0).is_err());
        assert!(build_uniform_grid(4, 3.0, -1.0).is_err());
        assert!(Axis1D::from_nodes(vec![0.0, 1.0, 1.0, 2.0]).is_err());
        assert!(Axis1D::from_nodes(vec![0.5, 1.0, 1.5, 2.0]).is_err());
    }

    #[test]
    fn table_grid_has_fifty_intervals_per_axis() {
        let g = build_uniform_grid(49, 300.0f64, 300.0).unwrap();
        assert_eq!(g.unknowns(), 49 * 49);
        assert_eq!(g.x.nodes().len() - 1, 50);
        assert!((g.x.node(1) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn partition_of_unity() {
        let g = build_uniform_grid(7, 300.0, 200.0).unwrap();
        let n = g.n();
        let total: f64 = (0..=n + 1).flat_map(|i| (0..=n + 1).map(move |j| (i, j))).map(|(i, j)| g.measure(i, j)).sum();
        assert!((total - 60000.0).abs() <= 1e-12 * 60000.0);
    }

    #[test]
    fn nonuniform_axis_midpoints() {
        let ax = Axis1D::from_nodes(vec![0.0, 1.0, 3.0, 7.0]).unwrap();
        assert_eq!(ax.midpoints(), vec![0.5, 2.0, 5.0]);
        let sum: f64 = (0..4).map(|i| ax.width(i)).sum();
        assert_eq!(sum, 7.0);
        assert!((0..4).all(|i| ax.width(i) > 0.0));
    }

    #[test]
    fn interaction_volume_geometry() {
        let g = build_uniform_grid(2, 3.0f64, 3.0).unwrap();
        let iv = g.interaction_volume(2, 2).unwrap();
        assert_eq!(iv.corners, [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]);
        assert_eq!(iv.center, [1.5, 1.5]);
        for p in 0..4 {
            let (a, b) = iv.half_edge(p);
            let dir = [b[0] - a[0], b[1] - a[1]];
            let n = iv.normals[p];
            assert_eq!(n[0] * dir[0] + n[1] * dir[1], 0.0);
            let len = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - len).abs() < 1e-15);
        }
        let corner = g.interaction_volume(1, 1).unwrap();
        assert_eq!(corner.corners[0], [0.0, 0.0]);
        assert_eq!(corner.center, [0.5, 0.5]);
        assert!(g.interaction_volume(0, 1).is_err());
        assert!(g.interaction_volume(4, 1).is_err());
    }

    #[test]
    fn interaction_volumes_tile_domain() {
        let g = build_uniform_grid(5, 10.0f64, 4.0).unwrap();
        let n = g.n();
        let mut area = 0.0f64;
        for i in 1..=n + 1 {
            for j in 1..=n + 1 {
                let c = g.interaction_volume(i, j).unwrap().corners;
                area += (c[2][0] - c[0][0]) * (c[2][1] - c[0][1]);
            }
        }
        assert!((area - 40.0).abs() < 1e-12);
    }

    #[test]
    fn each_interior_half_edge_has_one_owner() {
        // Every interior cell edge splits into two half-edges owned by distinct volumes.
        let g = build_uniform_grid(4, 5.0f64, 5.0).unwrap();
        let n = g.n();
        let mut seen = std::collections::HashMap::new();
        for i in 1..=n + 1 {
            for j in 1..=n + 1 {
                let iv = g.interaction_volume(i, j).unwrap();
                for p in 0..4 {
                    let (a, b) = iv.half_edge(p);
                    let key = [a, b].map(|q| q.map(|v| (v * 1000.0).round() as i64));
                    *seen.entry(key).or_insert(0) += 1;
                }
            }
        }
        assert!(seen.values().all(|&c| c == 1));
        assert_eq!(seen.len(), 4 * (n + 1) * (n + 1));
    }

    #[test]
    fn rotation_squares_to_minus_identity() {
        let v = [0.3f64, -1.7];
        let rr = rotate(rotate(v));
        assert_eq!(rr, [-0.3, 1.7]);
        let r = rotate(v);
        assert!(((r[0] * r[0] + r[1] * r[1]) - (v[0] * v[0] + v[1] * v[1])).abs() < 1e-15);
    }

    #[test]
    fn locate_interval() {
        let ax = Axis1D::uniform(3, 4.0).unwrap();
        assert_eq!(ax.locate(0.0), 0);
        assert_eq!(ax.locate(1.5), 1);
        assert_eq!(ax.locate(4.0), 3);
    }
}
