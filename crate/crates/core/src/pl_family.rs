//! Thresholded persistent-Laplacian families derived from a weighted graph Laplacian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseSymMatrix;
use crate::scalar::Scalar;

/// Extremes of the stored off-diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDiagStats<T> {
    pub l_min: T,
    pub l_max: T,
    /// `l_max − l_min`.
    pub d: T,
}

#[derive(Debug, Clone)]
pub struct LaplacianFamily<T> {
    pub base: SparseSymMatrix<T>,
    /// Member `i` is the family member with index `k = i + 1`.
    pub members: Vec<SparseSymMatrix<T>>,
    pub l_n: usize,
    pub offdiag_stats: OffDiagStats<T>,
}

impl<T> LaplacianFamily<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Min and max over stored off-diagonal entries. Structural zeros are not counted.
pub fn offdiag_range<T: Scalar>(base: &SparseSymMatrix<T>) -> Result<OffDiagStats<T>> {
    let mut it = base.off_diagonal().map(|(_, _, v)| v);
    let first = it.next().ok_or(Error::NoOffDiagonal)?;
    let (l_min, l_max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(OffDiagStats {
        l_min,
        l_max,
        d: l_max - l_min,
    })
}

fn check_indices(k: usize, l_n: usize) -> Result<()> {
    if l_n < 2 {
        return Err(Error::InvalidArgument(format!("l_n must be at least 2, got {l_n}")));
    }
    if k == 0 || k > l_n {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={l_n}, got {k}")));
    }
    Ok(())
}

/// Member `k` of an `l_n` family.
///
/// A stored off-diagonal entry becomes `0` when `L_ij ≤ (k/l_n)·d + L_min` and `−1`
/// otherwise; the diagonal is the negated row sum. With `invert` the scale is mirrored:
/// an entry becomes `0` when `L_ij ≥ L_max − (k/l_n)·d`, so the weakest edges are
/// removed first. Both directions remove every edge at `k = l_n`.
pub fn persistent_laplacian<T: Scalar>(
    base: &SparseSymMatrix<T>,
    k: usize,
    l_n: usize,
    invert: bool,
) -> Result<SparseSymMatrix<T>> {
    check_indices(k, l_n)?;
    let stats = offdiag_range(base)?;
    Ok(member(base, &stats, k, l_n, invert))
}

fn member<T: Scalar>(base: &SparseSymMatrix<T>, s: &OffDiagStats<T>, k: usize, l_n: usize, invert: bool) -> SparseSymMatrix<T> {
    let step = T::of_usize(k) / T::of_usize(l_n) * s.d;
    let dropped = |v: T| -> bool {
        if invert {
            let t = if k == l_n { s.l_min } else { s.l_max - step };
            v >= t
        } else {
            let t = if k == l_n { s.l_max } else { step + s.l_min };
            v <= t
        }
    };
    let n = base.n();
    let mut degree = vec![0usize; n];
    let mut triplets = Vec::new();
    for (i, j, v) in base.off_diagonal() {
        if !dropped(v) {
            degree[i] += 1;
            degree[j] += 1;
            triplets.push((i, j, -T::one()));
        }
    }
    triplets.extend(
        degree
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d > 0)
            .map(|(i, &d)| (i, i, T::of_usize(d))),
    );
    SparseSymMatrix::from_triplets(n, triplets).expect("indices come from a valid matrix")
}

/// Members `k = 1..l_n` (or `1..l_n−1` without `include_last`).
pub fn build_family<T: Scalar>(
    base: &SparseSymMatrix<T>,
    l_n: usize,
    include_last: bool,
    invert: bool,
) -> Result<LaplacianFamily<T>> {
    check_indices(1, l_n)?;
    let stats = offdiag_range(base)?;
    if stats.d == T::zero() {
        log::warn!("all off-diagonal entries are equal; every family member is the zero matrix");
    }
    let k_max = if include_last { l_n } else { l_n - 1 };
    let members = (1..=k_max).map(|k| member(base, &stats, k, l_n, invert)).collect();
    Ok(LaplacianFamily {
        base: base.clone(),
        members,
        l_n,
        offdiag_stats: stats,
    })
}
