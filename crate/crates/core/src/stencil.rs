//! Offset-keyed stencil rows over the full node lattice (boundary nodes included).

use crate::grid::Grid2D;
use crate::scalar::Real;

/// Neighbour offset `(di, dj)` relative to the row's own node.
pub type Offset = (i32, i32);

/// Weights of one control-volume balance, keyed by neighbour offset and kept
/// sorted so iteration order is deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StencilRow<S> {
    entries: Vec<(Offset, S)>,
}

impl<S: Real> StencilRow<S> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn add(&mut self, offset: Offset, weight: S) {
        match self.entries.binary_search_by(|(o, _)| o.cmp(&offset)) {
            Ok(k) => self.entries[k].1 = self.entries[k].1 + weight,
            Err(k) => self.entries.insert(k, (offset, weight)),
        }
    }

    /// Adds `scale * other`.
    pub fn add_scaled(&mut self, other: &StencilRow<S>, scale: S) {
        for &(o, w) in &other.entries {
            self.add(o, w * scale);
        }
    }

    pub fn get(&self, offset: Offset) -> S {
        self.entries
            .binary_search_by(|(o, _)| o.cmp(&offset))
            .map(|k| self.entries[k].1)
            .unwrap_or_else(|_| S::zero())
    }

    pub fn entries(&self) -> &[(Offset, S)] {
        &self.entries
    }

    /// Drops exact zeros.
    pub fn pruned(mut self) -> Self {
        self.entries.retain(|(_, w)| *w != S::zero());
        self
    }

    pub fn sum(&self) -> S {
        self.entries.iter().map(|(_, w)| *w).sum()
    }

    pub fn max_abs(&self) -> S {
        self.entries.iter().fold(S::zero(), |m, (_, w)| m.max(w.abs()))
    }

    /// Largest `max(|di|, |dj|)` with a nonzero weight.
    pub fn reach(&self) -> i32 {
        self.entries.iter().filter(|(_, w)| *w != S::zero()).map(|((a, b), _)| a.abs().max(b.abs())).max().unwrap_or(0)
    }

    /// Evaluates the row at node `(i, j)` of `grid` for a nodal field `v(i, j)`.
    pub fn apply(&self, i: usize, j: usize, v: impl Fn(usize, usize) -> S) -> S {
        self.entries
            .iter()
            .map(|&((di, dj), w)| w * v((i as i32 + di) as usize, (j as i32 + dj) as usize))
            .sum()
    }

    /// Checks every referenced node lies on the grid.
    pub fn fits(&self, grid: &Grid2D<S>, i: usize, j: usize) -> bool {
        let hi = grid.n() as i32 + 1;
        self.entries.iter().all(|&((di, dj), _)| {
            let (a, b) = (i as i32 + di, j as i32 + dj);
            (0..=hi).contains(&a) && (0..=hi).contains(&b)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_sorts() {
        let mut r = StencilRow::<f64>::new();
        r.add((1, 0), 2.0);
        r.add((-1, 0), 1.0);
        r.add((1, 0), -0.5);
        assert_eq!(r.entries(), &[((-1, 0), 1.0), ((1, 0), 1.5)]);
        assert_eq!(r.get((0, 0)), 0.0);
        assert_eq!(r.sum(), 2.5);
        assert_eq!(r.reach(), 1);
    }

    #[test]
    fn prune_removes_cancelled_entries() {
        let mut r = StencilRow::<f64>::new();
        r.add((0, 2), 1.0);
        r.add((0, 2), -1.0);
        r.add((0, 0), 3.0);
        let r = r.pruned();
        assert_eq!(r.entries().len(), 1);
        assert_eq!(r.reach(), 0);
    }
}
