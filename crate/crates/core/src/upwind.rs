//! Upwind approximation of the convective flux `∮ (f·n) V` of one control volume.
//!
//! Face velocities are sampled at the face abscissa. The face value is taken from
//! the cell on the side selected by the sign of `f·e` (`f ≥ 0` picks the lower
//! index): first order uses that cell's value, second order extrapolates linearly
//! from it and its next neighbour away from the face. Second-order rows fall
//! back to first order in cells adjacent to the boundary.

use crate::grid::Grid2D;
use crate::model::ConvectionField;
use crate::scalar::Real;
use crate::stencil::{Offset, StencilRow};

pub type UpwindStencil<S> = StencilRow<S>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpwindOrder {
    First,
    Second,
}

/// Which faces of a cell to include.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceMask {
    pub west: bool,
    pub south: bool,
    pub east: bool,
    pub north: bool,
}

impl FaceMask {
    pub const ALL: FaceMask = FaceMask { west: true, south: true, east: true, north: true };
}

/// Adds `scale * V̂` for the face between `lower` and `lower + dir`, where
/// `lower` is the offset of the cell on the low-index side.
fn add_face_value<S: Real>(
    row: &mut StencilRow<S>,
    order: UpwindOrder,
    velocity: S,
    lower: Offset,
    dir: Offset,
    scale: S,
) {
    let step = |o: Offset, k: i32| (o.0 + k * dir.0, o.1 + k * dir.1);
    let (near, far) = if velocity >= S::zero() {
        (lower, step(lower, -1))
    } else {
        (step(lower, 1), step(lower, 2))
    };
    match order {
        UpwindOrder::First => row.add(near, scale),
        UpwindOrder::Second => {
            row.add(near, scale * S::lit(1.5));
            row.add(far, -scale * S::half());
        }
    }
}

fn build_row<S: Real>(
    grid: &Grid2D<S>,
    field: &ConvectionField<S>,
    order: UpwindOrder,
    i: usize,
    j: usize,
    faces: FaceMask,
) -> UpwindStencil<S> {
    let mut row = StencilRow::new();
    let lj = grid.y.width(j);
    let hi = grid.x.width(i);
    if faces.east {
        let f = field.fx(grid.x.east_face(i));
        add_face_value(&mut row, order, f, (0, 0), (1, 0), lj * f);
    }
    if faces.west {
        let f = field.fx(grid.x.west_face(i));
        add_face_value(&mut row, order, f, (-1, 0), (1, 0), -lj * f);
    }
    if faces.north {
        let f = field.fy(grid.y.east_face(j));
        add_face_value(&mut row, order, f, (0, 0), (0, 1), hi * f);
    }
    if faces.south {
        let f = field.fy(grid.y.west_face(j));
        add_face_value(&mut row, order, f, (0, -1), (0, 1), -hi * f);
    }
    row.pruned()
}

/// First-order upwind balance row of cell `(i, j)`.
pub fn upwind1_row<S: Real>(grid: &Grid2D<S>, field: &ConvectionField<S>, i: usize, j: usize) -> UpwindStencil<S> {
    build_row(grid, field, UpwindOrder::First, i, j, FaceMask::ALL)
}

/// Second-order upwind balance row of cell `(i, j)`; first order next to the boundary.
pub fn upwind2_row<S: Real>(grid: &Grid2D<S>, field: &ConvectionField<S>, i: usize, j: usize) -> UpwindStencil<S> {
    convection_row(grid, field, UpwindOrder::Second, i, j, FaceMask::ALL)
}

/// True for cells whose second-order stencil falls back to first order.
pub fn is_boundary_adjacent<S: Real>(grid: &Grid2D<S>, i: usize, j: usize) -> bool {
    let n = grid.n();
    i == 1 || j == 1 || i == n || j == n
}

/// Convection row of the requested order restricted to `faces`.
pub fn convection_row<S: Real>(
    grid: &Grid2D<S>,
    field: &ConvectionField<S>,
    order: UpwindOrder,
    i: usize,
    j: usize,
    faces: FaceMask,
) -> UpwindStencil<S> {
    let order = if is_boundary_adjacent(grid, i, j) { UpwindOrder::First } else { order };
    build_row(grid, field, order, i, j, faces)
}
