//! Symmetric sparse matrices stored as an upper triangle.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Symmetric real sparse matrix.
///
/// Each stored `(row, col, value)` with `row <= col` stands for both `(row, col)` and
/// `(col, row)`. Entries are unique, nonzero, and kept sorted by `(row, col)`. A full
/// CSR copy of both triangles is built once at construction so that products walk rows
/// in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix<T> {
    n: usize,
    entries: Vec<(usize, usize, T)>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseSymMatrix<T> {
    /// Assembles from coordinate triplets. Either triangle may be given; `(i, j)` and
    /// `(j, i)` are folded onto the same stored entry and duplicates are summed. Entries
    /// that sum to exactly zero are dropped.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let mut acc: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite entry at ({i}, {j})")));
            }
            let key = if i <= j { (i, j) } else { (j, i) };
            *acc.entry(key).or_insert_with(T::zero) += v;
        }
        let entries = acc
            .into_iter()
            .filter(|&(_, v)| v != T::zero())
            .map(|((i, j), v)| (i, j, v))
            .collect();
        Ok(Self::from_sorted_upper(n, entries))
    }

    fn from_sorted_upper(n: usize, entries: Vec<(usize, usize, T)>) -> Self {
        let mut counts = vec![0usize; n];
        for &(i, j, _) in &entries {
            counts[i] += 1;
            if i != j {
                counts[j] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0usize; nnz];
        let mut values = vec![T::zero(); nnz];
        let mut fill = row_ptr[..n].to_vec();
        // Lower-triangle entries of row i come from stored (j, i) with j < i, which
        // appear earlier in the sorted list, so every CSR row ends up column-sorted.
        for &(i, j, v) in &entries {
            if i != j {
                col_idx[fill[j]] = i;
                values[fill[j]] = v;
                fill[j] += 1;
            }
        }
        for &(i, j, v) in &entries {
            col_idx[fill[i]] = j;
            values[fill[i]] = v;
            fill[i] += 1;
        }
        Self {
            n,
            entries,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_sorted_upper(n, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_sorted_upper(n, (0..n).map(|i| (i, i, T::one())).collect())
    }

    /// Reads the upper triangle of a dense symmetric matrix; the lower triangle is ignored.
    pub fn from_dense_upper(m: &DenseMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let n = m.rows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = m[(i, j)];
                if v != T::zero() {
                    entries.push((i, j, v));
                }
            }
        }
        Ok(Self::from_sorted_upper(n, entries))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored upper-triangle entries, sorted by `(row, col)`.
    #[inline]
    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    pub fn nnz_stored(&self) -> usize {
        self.entries.len()
    }

    /// Stored entries strictly above the diagonal.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries.iter().copied().filter(|&(i, j, _)| i != j)
    }

    /// Full symmetric row `i` as `(col, value)` pairs in column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries
            .binary_search_by(|&(r, c, _)| (r, c).cmp(&(i, j)))
            .map_or(T::zero(), |pos| self.entries[pos].2)
    }

    pub fn diagonal(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n];
        for &(i, j, v) in &self.entries {
            if i == j {
                d[i] = v;
            }
        }
        d
    }

    /// Exact symmetric product `M v`, accumulating each row in column order.
    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = vec![T::zero(); self.n];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn matvec_into(&self, v: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * v[self.col_idx[k]];
            }
            *o = acc;
        }
    }

    /// `M X` for a dense `n × k` block.
    pub fn matmul_dense(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if x.rows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.rows(),
            });
        }
        let k = x.cols();
        let mut out = DenseMatrix::zeros(self.n, k);
        for i in 0..self.n {
            let out_row = out.row_mut(i);
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.values[idx];
                for (o, &b) in out_row.iter_mut().zip(x.row(self.col_idx[idx])) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        self.values.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Pairs `(i, j)`, `i < j`, with a stored nonzero off-diagonal entry.
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        self.off_diagonal().map(|(i, j, _)| (i, j)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3_laplacian() -> SparseSymMatrix<f64> {
        SparseSymMatrix::from_triplets(
            3,
            [
                (0, 0, 1.0),
                (1, 1, 2.0),
                (2, 2, 1.0),
                (0, 1, -1.0),
                (1, 2, -1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_matvec() {
        let m = SparseSymMatrix::<f64>::identity(3);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_matvec() {
        let m = SparseSymMatrix::<f64>::zeros(3);
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn path_laplacian_matvec() {
        // L = D - W for 0-1-2; first column is [1, -1, 0].
        let m = p3_laplacian();
        assert_eq!(m.matvec(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, -1.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = p3_laplacian();
        assert!(matches!(
            m.matvec(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn triplets_fold_lower_triangle_and_drop_zeros() {
        let m = SparseSymMatrix::from_triplets(
            3,
            [(1, 0, 2.0), (0, 1, -2.0), (2, 1, 0.5), (2, 2, 0.0)],
        )
        .unwrap();
        assert_eq!(m.entries(), &[(1, 2, 0.5)]);
        assert_eq!(m.get(2, 1), 0.5);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SparseSymMatrix::from_triplets(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn csr_rows_are_column_sorted() {
        let m = SparseSymMatrix::from_triplets(
            4,
            [(0, 3, 1.0), (1, 3, 2.0), (2, 3, 3.0), (3, 3, 4.0), (0, 1, 5.0)],
        )
        .unwrap();
        let row3: Vec<_> = m.row(3).collect();
        assert_eq!(row3, vec![(0, 1.0), (1, 2.0), (2, 3.0), (3, 4.0)]);
    }
}
