//! L-method multi-point flux approximation on one interaction volume.
//!
//! Each interaction volume is split into two L-shaped triangles. Triangle `T1`
//! (corners 1, 2, 3, centred on corner 2) carries half-edges 1 and 2; triangle
//! `T2` (corners 1, 3, 4, centred on corner 4) carries half-edges 4 and 3.
//! Inside each of the three cells of an L the potential is linear; it is
//! determined by the cell value and two auxiliary values at the far ends of the
//! half-edges. Requiring the centre cell's flux to equal the side cell's flux
//! across both half-edges gives a 2x2 system for the auxiliary values, which is
//! eliminated to express the two half-edge fluxes through the three cell values.

use crate::error::{PricerError, Result};
use crate::grid::{rotate, InteractionVolumeGeometry, Point};
use crate::model::CellTensor;
use crate::scalar::Real;

#[inline]
fn sub<S: Real>(a: Point<S>, b: Point<S>) -> Point<S> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn dot<S: Real>(a: Point<S>, b: Point<S>) -> S {
    a[0] * b[0] + a[1] * b[1]
}

/// Weights `w1, w2, w3` with `∇g = w1 g1 + w2 g2 + w3 g3` for the linear
/// interpolant on triangle `x1 x2 x3`.
///
/// With `ν₂ = R(x3 − x1)`, `ν₃ = −R(x2 − x1)` and `T = ν₂ᵀRν₃`,
/// `∇g = (ν₂(g2 − g1) + ν₃(g3 − g1)) / T`.
pub fn gradient_weights<S: Real>(x1: Point<S>, x2: Point<S>, x3: Point<S>) -> Result<[Point<S>; 3]> {
    let e2 = sub(x2, x1);
    let e3 = sub(x3, x1);
    let nu2 = rotate(e3);
    let r = rotate(e2);
    let nu3 = [-r[0], -r[1]];
    let t = dot(nu2, rotate(nu3));
    let scale = dot(e2, e2).sqrt() * dot(e3, e3).sqrt();
    if !(t.abs() > S::lit(1e-14) * scale) {
        return Err(PricerError::DegenerateTriangle);
    }
    let w2 = [nu2[0] / t, nu2[1] / t];
    let w3 = [nu3[0] / t, nu3[1] / t];
    Ok([[-(w2[0] + w3[0]), -(w2[1] + w3[1])], w2, w3])
}

/// Gradient of the linear function through `(x_k, g_k)`, `k = 1, 2, 3`.
pub fn gradient_of_linear<S: Real>(corners: [Point<S>; 3], values: [S; 3]) -> Result<Point<S>> {
    let w = gradient_weights(corners[0], corners[1], corners[2])?;
    Ok([
        w[0][0] * values[0] + w[1][0] * values[1] + w[2][0] * values[2],
        w[0][1] * values[0] + w[1][1] * values[1] + w[2][1] * values[2],
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Triangle {
    T1,
    T2,
}

/// Linear form over `(V_centre, V_sideA, V_sideB, ū_a, ū_b)`.
type Form<S> = [S; 5];

fn scaled_add<S: Real>(acc: &mut Form<S>, f: &Form<S>, s: S) {
    for (a, b) in acc.iter_mut().zip(f) {
        *a = *a + *b * s;
    }
}

fn unit<S: Real>(k: usize) -> Form<S> {
    let mut f = [S::zero(); 5];
    f[k] = S::one();
    f
}

/// Gradient (as two linear forms) of the interpolant with nodal forms `forms`.
fn gradient_form<S: Real>(pts: [Point<S>; 3], forms: [Form<S>; 3]) -> Result<[Form<S>; 2]> {
    let w = gradient_weights(pts[0], pts[1], pts[2])?;
    let mut gx = [S::zero(); 5];
    let mut gy = [S::zero(); 5];
    for k in 0..3 {
        scaled_add(&mut gx, &forms[k], w[k][0]);
        scaled_add(&mut gy, &forms[k], w[k][1]);
    }
    Ok([gx, gy])
}

/// `nᵀ M g` as a linear form.
fn flux_form<S: Real>(n: Point<S>, m: &CellTensor<S>, g: &[Form<S>; 2]) -> Form<S> {
    let mn = m.apply(n);
    let mut f = [S::zero(); 5];
    scaled_add(&mut f, &g[0], mn[0]);
    scaled_add(&mut f, &g[1], mn[1]);
    f
}

/// Local flux-continuity system of one L-triangle.
///
/// The half-edge fluxes read `g = C ū + D W` and continuity reads `A ū = B W`,
/// where `ū` are the two auxiliary values and `W` the three cell values in
/// triangle order (`T1`: corners 1, 2, 3; `T2`: corners 1, 3, 4).
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTriangleSystem<S> {
    pub triangle: Triangle,
    /// Half-edges (0-based) whose fluxes the rows describe.
    pub half_edges: [usize; 2],
    /// Corners (0-based) making up `W`.
    pub corners: [usize; 3],
    pub c: [[S; 2]; 2],
    pub d: [[S; 3]; 2],
    pub a: [[S; 2]; 2],
    pub b: [[S; 3]; 2],
}

impl<S: Real> LocalTriangleSystem<S> {
    pub fn determinant(&self) -> S {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    /// Eliminates the auxiliary values: `R = C A⁻¹ B + D`, rows follow `half_edges`,
    /// columns follow `corners`.
    pub fn flux_matrix(&self, iv: (usize, usize)) -> Result<[[S; 3]; 2]> {
        let det = self.determinant();
        let norm = self.a.iter().flatten().fold(S::zero(), |m, v| m.max(v.abs()));
        if !(det.abs() > S::lit(1e-14) * norm * norm) {
            return Err(PricerError::SingularLocalSystem { i: iv.0, j: iv.1, det: det.as_f64() });
        }
        let inv = [[self.a[1][1] / det, -self.a[0][1] / det], [-self.a[1][0] / det, self.a[0][0] / det]];
        let mut aux = [[S::zero(); 3]; 2];
        for r in 0..2 {
            for c in 0..3 {
                aux[r][c] = inv[r][0] * self.b[0][c] + inv[r][1] * self.b[1][c];
            }
        }
        let mut out = self.d;
        for r in 0..2 {
            for c in 0..3 {
                out[r][c] = out[r][c] + self.c[r][0] * aux[0][c] + self.c[r][1] * aux[1][c];
            }
        }
        Ok(out)
    }
}

/// Layout of an L: centre corner, the two side corners and the half-edges
/// separating them from the centre.
struct LLayout {
    centre: usize,
    side_a: usize,
    side_b: usize,
    edge_a: usize,
    edge_b: usize,
    corners: [usize; 3],
}

fn layout(t: Triangle) -> LLayout {
    match t {
        Triangle::T1 => LLayout { centre: 1, side_a: 0, side_b: 2, edge_a: 0, edge_b: 1, corners: [0, 1, 2] },
        Triangle::T2 => LLayout { centre: 3, side_a: 0, side_b: 2, edge_a: 3, edge_b: 2, corners: [0, 2, 3] },
    }
}

/// Builds the continuity system of triangle `t`. `tensors` are the averaged
/// tensors of the four corner control volumes in corner order.
pub fn triangle_local_system<S: Real>(
    geom: &InteractionVolumeGeometry<S>,
    tensors: &[CellTensor<S>; 4],
    t: Triangle,
) -> Result<LocalTriangleSystem<S>> {
    let l = layout(t);
    let x_c = geom.corners[l.centre];
    let x_a = geom.corners[l.side_a];
    let x_b = geom.corners[l.side_b];
    let aux_a = geom.edge_midpoints[l.edge_a];
    let aux_b = geom.edge_midpoints[l.edge_b];
    let x5 = geom.center;
    let (v_c, v_a, v_b, u_a, u_b) = (unit(0), unit(1), unit(2), unit(3), unit(4));

    let g_c = gradient_form([aux_a, x_c, aux_b], [u_a, v_c, u_b])?;
    // ū₅ at the volume centre from the centre cell's linear function
    let mut u5 = v_c;
    let d5 = sub(x5, x_c);
    scaled_add(&mut u5, &g_c[0], d5[0]);
    scaled_add(&mut u5, &g_c[1], d5[1]);
    let g_a = gradient_form([x_a, aux_a, x5], [v_a, u_a, u5])?;
    let g_b = gradient_form([x5, aux_b, x_b], [u5, u_b, v_b])?;

    let n_a = geom.normals[l.edge_a];
    let n_b = geom.normals[l.edge_b];
    let f_a = flux_form(n_a, &tensors[l.centre], &g_c);
    let f_b = flux_form(n_b, &tensors[l.centre], &g_c);
    let mut e_a = f_a;
    scaled_add(&mut e_a, &flux_form(n_a, &tensors[l.side_a], &g_a), -S::one());
    let mut e_b = f_b;
    scaled_add(&mut e_b, &flux_form(n_b, &tensors[l.side_b], &g_b), -S::one());

    // forms are over (centre, side a, side b); reorder to the W corner ordering
    let to_w = |f: &Form<S>| -> [S; 3] {
        let mut w = [S::zero(); 3];
        for (slot, &corner) in l.corners.iter().enumerate() {
            w[slot] = if corner == l.centre {
                f[0]
            } else if corner == l.side_a {
                f[1]
            } else {
                f[2]
            };
        }
        w
    };
    let neg = |w: [S; 3]| w.map(|v| -v);
    Ok(LocalTriangleSystem {
        triangle: t,
        half_edges: [l.edge_a, l.edge_b],
        corners: l.corners,
        c: [[f_a[3], f_a[4]], [f_b[3], f_b[4]]],
        d: [to_w(&f_a), to_w(&f_b)],
        a: [[e_a[3], e_a[4]], [e_b[3], e_b[4]]],
        b: [neg(to_w(&e_a)), neg(to_w(&e_b))],
    })
}

/// Half-edge fluxes of one interaction volume as linear functions of its corner values.
///
/// Row `p` is the flux `n_pᵀ M ∇V` through half-edge `p + 1`; column `q` is corner
/// `q + 1`, i.e. `(V_{i-1,j-1}, V_{i,j-1}, V_{ij}, V_{i-1,j})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmissibility<S> {
    pub t: [[S; 4]; 4],
}

impl<S: Real> Transmissibility<S> {
    pub fn fluxes(&self, corner_values: [S; 4]) -> [S; 4] {
        self.t.map(|row| row.iter().zip(corner_values).fold(S::zero(), |acc, (w, v)| acc + *w * v))
    }

    /// Largest `|row sum| / ‖row‖_∞` over the four rows.
    pub fn max_relative_row_sum(&self) -> S {
        self.t
            .iter()
            .map(|row| {
                let s: S = row.iter().copied().sum();
                let norm = row.iter().fold(S::zero(), |m, v| m.max(v.abs()));
                if norm > S::zero() {
                    s.abs() / norm
                } else {
                    S::zero()
                }
            })
            .fold(S::zero(), S::max)
    }
}

/// Transmissibility matrix of interaction volume `geom`.
pub fn transmissibility<S: Real>(
    geom: &InteractionVolumeGeometry<S>,
    tensors: &[CellTensor<S>; 4],
) -> Result<Transmissibility<S>> {
    let mut t = [[S::zero(); 4]; 4];
    if tensors.iter().all(|m| *m == CellTensor::default()) {
        // no diffusion anywhere in the volume: every flux vanishes
        return Ok(Transmissibility { t });
    }
    for tri in [Triangle::T1, Triangle::T2] {
        let sys = triangle_local_system(geom, tensors, tri)?;
        let r = sys.flux_matrix((geom.i, geom.j))?;
        for (row, &edge) in sys.half_edges.iter().enumerate() {
            for (col, &corner) in sys.corners.iter().enumerate() {
                t[edge][corner] = r[row][col];
            }
        }
    }
    Ok(Transmissibility { t })
}
