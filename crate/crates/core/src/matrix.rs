//! Dense symmetric matrix with zero diagonal, used for arc costs,
//! reliabilities and delays.

/// Symmetric `n x n` matrix stored densely. Writes through [`SymMatrix::set`]
/// keep both triangles in sync; the diagonal is fixed at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Builds a matrix by evaluating `f(i, j)` once per unordered pair `i < j`.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`. Diagonal entries are rejected.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert_ne!(i, j, "diagonal entries are fixed at zero");
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    /// Entries of the strict lower triangle, row by row: `(i, j, v)` with `j < i`.
    pub fn lower_triangle(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..self.n).flat_map(move |i| (0..i).map(move |j| (i, j, self.get(i, j))))
    }

    /// True when every off-diagonal entry satisfies `pred` and the diagonal is zero.
    pub fn entries_satisfy<F: Fn(f64) -> bool>(&self, pred: F) -> bool {
        for i in 0..self.n {
            if self.data[i * self.n + i] != 0.0 {
                return false;
            }
            for j in 0..self.n {
                if i != j && !pred(self.get(i, j)) {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_mirrors_both_triangles() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 2, 4.5);
        assert_eq!(m.get(0, 2), 4.5);
        assert_eq!(m.get(2, 0), 4.5);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn lower_triangle_covers_every_pair_once() {
        let m = SymMatrix::from_fn(4, |i, j| (i * 10 + j) as f64);
        let entries: Vec<_> = m.lower_triangle().collect();
        assert_eq!(entries.len(), 6);
        // from_fn evaluates with i < j, so (i, j, v) here carries v = j*10 + i.
        assert!(entries.contains(&(3, 1, 13.0)));
    }

    #[test]
    #[should_panic]
    fn diagonal_writes_rejected() {
        let mut m = SymMatrix::zeros(2);
        m.set(1, 1, 1.0);
    }
}
