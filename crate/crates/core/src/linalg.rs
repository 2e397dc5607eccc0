//! Sparse matrices and the linear solvers used by the time stepper.

use rayon::prelude::*;

use crate::error::{PricerError, Result};
use crate::scalar::Real;

/// Rows above this count use parallel matrix-vector products.
const PAR_ROWS: usize = 4096;

/// Something that can be applied to a vector.
pub trait LinearOperator<S>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[S], y: &mut [S]);
}

/// Approximate inverse used inside Krylov iterations.
pub trait Preconditioner<S>: Sync {
    fn apply(&self, r: &[S], z: &mut [S]);
}

/// Identity preconditioner.
pub struct NoPreconditioner;

impl<S: Real> Preconditioner<S> for NoPreconditioner {
    fn apply(&self, r: &[S], z: &mut [S]) {
        z.copy_from_slice(r);
    }
}

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<S> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<S>,
}

impl<S: Real> CsrMatrix<S> {
    /// Builds a square matrix from per-row `(col, value)` lists sorted by column.
    pub fn from_sorted_rows(dim: usize, rows: impl IntoIterator<Item = Vec<(usize, S)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, v) in row {
                debug_assert!(c < dim);
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        assert_eq!(row_ptr.len(), dim + 1, "row count must equal dimension");
        Self { dim, row_ptr, cols, vals }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_sorted_rows(dim, (0..dim).map(|r| vec![(r, S::one())]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, S)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => S::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<S> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.dim {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    /// `alpha * I + beta * self` (every diagonal entry must be structurally present).
    pub fn shifted(&self, alpha: S, beta: S) -> Self {
        let mut out = self.clone();
        for r in 0..self.dim {
            for k in out.row_ptr[r]..out.row_ptr[r + 1] {
                out.vals[k] = beta * out.vals[k];
                if out.cols[k] == r {
                    out.vals[k] = out.vals[k] + alpha;
                }
            }
        }
        out
    }

    /// Inserts explicit zero diagonal entries where missing.
    pub fn with_diagonal(&self) -> Self {
        let rows = (0..self.dim).map(|r| {
            let mut row: Vec<(usize, S)> = self.row(r).collect();
            if let Err(k) = row.binary_search_by_key(&r, |e| e.0) {
                row.insert(k, (r, S::zero()));
            }
            row
        });
        Self::from_sorted_rows(self.dim, rows)
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        let mut y = vec![S::zero(); self.dim];
        self.apply(x, &mut y);
        y
    }

    fn row_dot(&self, r: usize, x: &[S]) -> S {
        let mut acc = S::zero();
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            acc = acc + self.vals[k] * x[self.cols[k]];
        }
        acc
    }
}

impl<S: Real> LinearOperator<S> for CsrMatrix<S> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[S], y: &mut [S]) {
        if self.dim >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, out)| *out = self.row_dot(r, x));
        } else {
            for (r, out) in y.iter_mut().enumerate() {
                *out = self.row_dot(r, x);
            }
        }
    }
}

/// `base + diag(shift)`.
pub struct DiagonallyShifted<'a, S> {
    pub base: &'a CsrMatrix<S>,
    pub shift: &'a [S],
}

impl<S: Real> LinearOperator<S> for DiagonallyShifted<'_, S> {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn apply(&self, x: &[S], y: &mut [S]) {
        self.base.apply(x, y);
        for ((out, s), xi) in y.iter_mut().zip(self.shift).zip(x) {
            *out = *out + *s * *xi;
        }
    }
}

/// LU factorisation with partial pivoting of a banded matrix.
#[derive(Debug, Clone)]
pub struct BandedLu<S> {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<S>,
    pivots: Vec<usize>,
}

impl<S: Real> BandedLu<S> {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // row offset kl + ku + i - j inside column j
        j * self.ldab + self.kl + self.ku + i - j
    }

    pub fn factor(a: &CsrMatrix<S>) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let ldab = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, ku, ldab, ab: vec![S::zero(); ldab * n], pivots: vec![0; n] };
        for r in 0..n {
            for (c, v) in a.row(r) {
                let k = lu.idx(r, c);
                lu.ab[k] = v;
            }
        }
        let kv = kl + ku;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = S::zero();
            for q in 0..=km {
                let v = lu.ab[lu.idx(j + q, j)].abs();
                if v > best {
                    best = v;
                    p = q;
                }
            }
            lu.pivots[j] = j + p;
            if best == S::zero() || !best.is_finite() {
                return Err(PricerError::LinearSolver(format!("singular matrix at column {j}")));
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let (a1, a2) = (lu.idx(j, c), lu.idx(j + p, c));
                    lu.ab.swap(a1, a2);
                }
            }
            if km > 0 {
                let inv = S::one() / lu.ab[lu.idx(j, j)];
                for q in 1..=km {
                    let k = lu.idx(j + q, j);
                    lu.ab[k] = lu.ab[k] * inv;
                }
                for c in j + 1..=ju {
                    let u = lu.ab[lu.idx(j, c)];
                    if u == S::zero() {
                        continue;
                    }
                    debug_assert!(c - j <= kv);
                    let col = c * ldab + kl + ku;
                    let lcol = j * ldab + kl + ku;
                    for q in 1..=km {
                        let i = j + q;
                        let l = lu.ab[lcol + i - j];
                        lu.ab[col + i - c] = lu.ab[col + i - c] - l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    /// Solves in place.
    pub fn solve_in_place(&self, b: &mut [S]) {
        let n = self.n;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let bj = b[j];
            if bj != S::zero() {
                for q in 1..=km {
                    b[j + q] = b[j + q] - self.ab[self.idx(j + q, j)] * bj;
                }
            }
        }
        let kv = self.kl + self.ku;
        for j in (0..n).rev() {
            b[j] = b[j] / self.ab[self.idx(j, j)];
            let bj = b[j];
            if bj != S::zero() {
                for i in j.saturating_sub(kv)..j {
                    b[i] = b[i] - self.ab[self.idx(i, j)] * bj;
                }
            }
        }
    }
}

impl<S: Real> Preconditioner<S> for BandedLu<S> {
    fn apply(&self, r: &[S], z: &mut [S]) {
        z.copy_from_slice(r);
        self.solve_in_place(z);
    }
}

/// Incomplete LU with the sparsity of the matrix itself.
#[derive(Debug, Clone)]
pub struct Ilu0<S> {
    m: CsrMatrix<S>,
    diag: Vec<usize>,
}

impl<S: Real> Ilu0<S> {
    pub fn factor(a: &CsrMatrix<S>) -> Result<Self> {
        let mut m = a.with_diagonal();
        let n = m.dim;
        let mut diag = vec![0; n];
        for r in 0..n {
            diag[r] = (m.row_ptr[r]..m.row_ptr[r + 1]).find(|&k| m.cols[k] == r).expect("diagonal present");
        }
        for i in 1..n {
            let (start, end) = (m.row_ptr[i], m.row_ptr[i + 1]);
            for kk in start..end {
                let k = m.cols[kk];
                if k >= i {
                    break;
                }
                let pivot = m.vals[diag[k]];
                if pivot == S::zero() {
                    return Err(PricerError::LinearSolver(format!("zero pivot in ILU(0) at row {k}")));
                }
                let lik = m.vals[kk] / pivot;
                m.vals[kk] = lik;
                // a_ij -= l_ik u_kj for j > k present in row i
                let mut p = kk + 1;
                for q in diag[k] + 1..m.row_ptr[k + 1] {
                    let j = m.cols[q];
                    while p < end && m.cols[p] < j {
                        p += 1;
                    }
                    if p < end && m.cols[p] == j {
                        m.vals[p] = m.vals[p] - lik * m.vals[q];
                    }
                }
            }
        }
        Ok(Self { m, diag })
    }
}

impl<S: Real> Preconditioner<S> for Ilu0<S> {
    fn apply(&self, r: &[S], z: &mut [S]) {
        let m = &self.m;
        let n = m.dim;
        for i in 0..n {
            let mut acc = r[i];
            for k in m.row_ptr[i]..self.diag[i] {
                acc = acc - m.vals[k] * z[m.cols[k]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag[i] + 1..m.row_ptr[i + 1] {
                acc = acc - m.vals[k] * z[m.cols[k]];
            }
            z[i] = acc / m.vals[self.diag[i]];
        }
    }
}

fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn norm2<S: Real>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats<S> {
    pub iterations: usize,
    pub relative_residual: S,
}

/// Preconditioned BiCGSTAB for `A x = b`, starting from the contents of `x`.
/// Stops when `‖b − A x‖₂ ≤ tol ‖b‖₂`.
pub fn bicgstab<S: Real>(
    a: &dyn LinearOperator<S>,
    m: &dyn Preconditioner<S>,
    b: &[S],
    x: &mut [S],
    tol: S,
    max_iter: usize,
) -> Result<KrylovStats<S>> {
    let n = a.dim();
    let bnorm = norm2(b);
    if bnorm == S::zero() {
        x.iter_mut().for_each(|v| *v = S::zero());
        return Ok(KrylovStats { iterations: 0, relative_residual: S::zero() });
    }
    let mut r = vec![S::zero(); n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
    let mut res = norm2(&r) / bnorm;
    if res <= tol {
        return Ok(KrylovStats { iterations: 0, relative_residual: res });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (S::one(), S::one(), S::one());
    let mut v = vec![S::zero(); n];
    let mut p = vec![S::zero(); n];
    let mut y = vec![S::zero(); n];
    let mut z = vec![S::zero(); n];
    let mut s = vec![S::zero(); n];
    let mut t = vec![S::zero(); n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == S::zero() || !rho_new.is_finite() {
            return Err(PricerError::LinearSolver(format!("BiCGSTAB breakdown (rho) at iteration {it}")));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        m.apply(&p, &mut y);
        a.apply(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == S::zero() || !denom.is_finite() {
            return Err(PricerError::LinearSolver(format!("BiCGSTAB breakdown (alpha) at iteration {it}")));
        }
        alpha = rho_new / denom;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        res = norm2(&s) / bnorm;
        if res <= tol {
            for k in 0..n {
                x[k] = x[k] + alpha * y[k];
            }
            return Ok(KrylovStats { iterations: it, relative_residual: res });
        }
        m.apply(&s, &mut z);
        a.apply(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == S::zero() {
            return Err(PricerError::LinearSolver(format!("BiCGSTAB breakdown (omega) at iteration {it}")));
        }
        omega = dot(&t, &s) / tt;
        for k in 0..n {
            x[k] = x[k] + alpha * y[k] + omega * z[k];
            r[k] = s[k] - omega * t[k];
        }
        res = norm2(&r) / bnorm;
        if res <= tol {
            return Ok(KrylovStats { iterations: it, relative_residual: res });
        }
        if omega == S::zero() {
            return Err(PricerError::LinearSolver(format!("BiCGSTAB stagnated at iteration {it}")));
        }
        rho = rho_new;
    }
    Err(PricerError::LinearSolver(format!(
        "BiCGSTAB did not reach {tol} in {max_iter} iterations (residual {res})"
    )))
}
