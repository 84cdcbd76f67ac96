//! Householder QR with column pivoting, used to extract orthonormal null-space bases.

use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Orthonormal basis (as columns) of `ker(A)` for an `r × c` matrix `A`.
///
/// Computed from a column-pivoted Householder QR of `Aᵀ`: the trailing columns of `Q`
/// past the numerical rank span the orthogonal complement of the row space of `A`. A
/// pivot is treated as zero when its column norm is `≤ rel_tol · max(1, first pivot)`.
pub fn null_space<T: Scalar>(a: &DenseMatrix<T>, rel_tol: T) -> DenseMatrix<T> {
    let c = a.cols();
    let (rank, reflectors) = pivoted_householder(&a.transpose(), rel_tol);
    let mut q = DenseMatrix::identity(c);
    for (k, v) in reflectors.iter().enumerate().rev() {
        apply_reflector(&mut q, k, v, 0);
    }
    let mut out = DenseMatrix::zeros(c, c - rank);
    for i in 0..c {
        for j in rank..c {
            out[(i, j - rank)] = q[(i, j)];
        }
    }
    out
}

/// Numerical rank using the same pivoting rule as [`null_space`].
pub fn numerical_rank<T: Scalar>(a: &DenseMatrix<T>, rel_tol: T) -> usize {
    pivoted_householder(a, rel_tol).0
}

/// Returns the rank and the Householder vectors (each of length `m − k`).
fn pivoted_householder<T: Scalar>(m_in: &DenseMatrix<T>, rel_tol: T) -> (usize, Vec<Vec<T>>) {
    let mut m = m_in.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let steps = rows.min(cols);
    let mut reflectors = Vec::with_capacity(steps);
    let mut threshold = None;
    for k in 0..steps {
        let (best_col, best_norm) = (k..cols)
            .map(|j| {
                let s: T = (k..rows).map(|i| m[(i, j)] * m[(i, j)]).sum();
                (j, s.sqrt())
            })
            .fold((k, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        let thr = *threshold.get_or_insert_with(|| rel_tol * best_norm.max(T::one()));
        if best_norm <= thr {
            return (k, reflectors);
        }
        if best_col != k {
            for i in 0..rows {
                let tmp = m[(i, k)];
                m[(i, k)] = m[(i, best_col)];
                m[(i, best_col)] = tmp;
            }
        }
        let x0 = m[(k, k)];
        let alpha = if x0 >= T::zero() { -best_norm } else { best_norm };
        let mut v: Vec<T> = (k..rows).map(|i| m[(i, k)]).collect();
        v[0] -= alpha;
        let vn = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if vn > T::zero() {
            v.iter_mut().for_each(|x| *x /= vn);
        }
        apply_reflector(&mut m, k, &v, k);
        reflectors.push(v);
    }
    (steps, reflectors)
}

/// Applies `I − 2vvᵀ` to rows `k..` of `m`, columns `col0..`.
fn apply_reflector<T: Scalar>(m: &mut DenseMatrix<T>, k: usize, v: &[T], col0: usize) {
    let two = T::of(2.0);
    for j in col0..m.cols() {
        let s: T = v.iter().enumerate().map(|(i, &vi)| vi * m[(k + i, j)]).sum();
        if s == T::zero() {
            continue;
        }
        for (i, &vi) in v.iter().enumerate() {
            m[(k + i, j)] -= two * s * vi;
        }
    }
}
