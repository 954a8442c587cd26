use ndarray::{Array2, ArrayView2};

use crate::parallel;

/// Symmetric sparse operator stored as full CSR (both triangles).
///
/// Built from `(i, j, w)` triplets with `i <= j`; a triplet with `i == j`
/// adds to the diagonal, any other adds `w` at `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymOperator {
    n: usize,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
}

impl SparseSymOperator {
    pub fn from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        assert!(u32::try_from(n).is_ok(), "{n} rows exceed the u32 column index");
        let mut diag = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for &(i, j, _) in entries {
            assert!(i < n && j < n, "entry ({i}, {j}) outside {n}x{n}");
            if i != j {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut col = vec![0u32; nnz];
        let mut val = vec![0.0; nnz];
        let mut fill = row_ptr[..n].to_vec();
        for &(i, j, w) in entries {
            if i == j {
                diag[i] += w;
            } else {
                col[fill[i]] = j as u32;
                val[fill[i]] = w;
                fill[i] += 1;
                col[fill[j]] = i as u32;
                val[fill[j]] = w;
                fill[j] += 1;
            }
        }
        Self {
            n,
            diag,
            row_ptr,
            col,
            val,
        }
    }

    pub fn identity(n: usize) -> Self {
        let entries: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_entries(n, &entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal neighbors of row `i` with their weights.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[range.clone()]
            .iter()
            .map(|&j| j as usize)
            .zip(self.val[range].iter().copied())
    }

    pub fn off_diagonal_nnz(&self) -> usize {
        self.col.len()
    }

    /// `y = A x` for a single vector.
    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        parallel::map_range(self.n, |i| {
            let mut acc = self.diag[i] * x[i];
            for (j, w) in self.row(i) {
                acc += w * x[j];
            }
            acc
        })
    }

    /// `Y = A X` applied to every column of `x`.
    pub fn apply(&self, x: &ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut out = Array2::<f64>::zeros(x.raw_dim());
        parallel::for_each_row_mut(&mut out, |i, mut row| {
            row.scaled_add(self.diag[i], &x.row(i));
            for (j, w) in self.row(i) {
                row.scaled_add(w, &x.row(j));
            }
        });
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::<f64>::zeros((self.n, self.n));
        for i in 0..self.n {
            d[[i, i]] += self.diag[i];
            for (j, w) in self.row(i) {
                d[[i, j]] += w;
            }
        }
        d
    }
}
